use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::landmarks::{LandmarkId, LANDMARK_COUNT};
use crate::error::{CephError, Result};

const DEFAULT_SCHEMA: &str = include_str!("../../data/default_schema.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LandmarkDef {
    pub index: LandmarkId,
    pub name: String,
}

/// A topological centre of the anatomical graph and its base colour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalCenter {
    pub index: LandmarkId,
    pub rgb: [u8; 3],
}

/// Unsigned angle `ray_a-vertex-ray_b` kept inside `[min_deg, max_deg]`.
///
/// Augmenting the constraint rotates `ray_b` and every `coupled` landmark
/// rigidly about `vertex`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleConstraint {
    pub name: String,
    pub vertex: LandmarkId,
    pub ray_a: LandmarkId,
    pub ray_b: LandmarkId,
    pub min_deg: f64,
    pub max_deg: f64,
    #[serde(default)]
    pub coupled: BTreeSet<LandmarkId>,
}

impl AngleConstraint {
    pub fn contains(&self, deg: f64, tol: f64) -> bool {
        deg >= self.min_deg - tol && deg <= self.max_deg + tol
    }
}

/// On-disk layout of a schema file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaFile {
    landmarks: Vec<LandmarkDef>,
    edges: Vec<[LandmarkId; 2]>,
    critical_centers: Vec<CriticalCenter>,
    #[serde(default)]
    constraints: Vec<ConstraintFile>,
    #[serde(default)]
    neighbor_groups: BTreeMap<LandmarkId, BTreeSet<LandmarkId>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintFile {
    name: String,
    vertex: LandmarkId,
    ray_a: LandmarkId,
    ray_b: LandmarkId,
    min_deg: f64,
    max_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coupled: Option<BTreeSet<LandmarkId>>,
}

/// Landmark identities, anatomical graph, critical centres and constraints.
///
/// Instances only exist in validated form: the graph is connected, the
/// critical centres are landmarks with pairwise distinct colours and every
/// constraint is well formed.
#[derive(Debug, Clone, PartialEq)]
pub struct AnatomySchema {
    landmarks: Vec<LandmarkDef>,
    edges: Vec<(LandmarkId, LandmarkId)>,
    critical_centers: Vec<CriticalCenter>,
    constraints: Vec<AngleConstraint>,
    neighbor_groups: BTreeMap<LandmarkId, BTreeSet<LandmarkId>>,
}

impl AnatomySchema {
    /// The bundled 38-landmark schema.
    pub fn default_schema() -> Self {
        Self::from_json_str(DEFAULT_SCHEMA, "default schema").expect("bundled schema is valid")
    }

    pub fn default_schema_json() -> &'static str {
        DEFAULT_SCHEMA
    }

    pub fn from_json_str(text: &str, context: &str) -> Result<Self> {
        let file: SchemaFile = serde_json::from_str(text).map_err(|e| CephError::json(context, e))?;
        Self::from_file(file)
    }

    fn from_file(file: SchemaFile) -> Result<Self> {
        let constraints = file
            .constraints
            .into_iter()
            .map(|c| {
                let coupled = match c.coupled {
                    Some(set) => set,
                    None => file.neighbor_groups.get(&c.ray_b).cloned().unwrap_or_default(),
                };
                AngleConstraint {
                    name: c.name,
                    vertex: c.vertex,
                    ray_a: c.ray_a,
                    ray_b: c.ray_b,
                    min_deg: c.min_deg,
                    max_deg: c.max_deg,
                    coupled,
                }
            })
            .collect();
        let edges = file.edges.into_iter().map(|[a, b]| (a, b)).collect();
        Self::new(
            file.landmarks,
            edges,
            file.critical_centers,
            constraints,
            file.neighbor_groups,
        )
    }

    pub fn new(
        landmarks: Vec<LandmarkDef>,
        edges: Vec<(LandmarkId, LandmarkId)>,
        critical_centers: Vec<CriticalCenter>,
        constraints: Vec<AngleConstraint>,
        neighbor_groups: BTreeMap<LandmarkId, BTreeSet<LandmarkId>>,
    ) -> Result<Self> {
        let err = |rule: String| CephError::invariant("schema", rule);

        // Landmarks: exactly 1..=38, unique names.
        if landmarks.len() != LANDMARK_COUNT as usize {
            return Err(err(format!(
                "expected {} landmarks, found {}",
                LANDMARK_COUNT,
                landmarks.len()
            )));
        }
        let mut landmarks = landmarks;
        landmarks.sort_by_key(|l| l.index);
        for (expected, def) in LandmarkId::all().zip(&landmarks) {
            if def.index != expected {
                return Err(err(format!(
                    "landmark indices must be unique and contiguous 1..{}; expected {} found {}",
                    LANDMARK_COUNT, expected.0, def.index.0
                )));
            }
            if def.name.trim().is_empty() {
                return Err(err(format!("landmark {} has an empty name", def.index.0)));
            }
        }
        let mut names = BTreeSet::new();
        for def in &landmarks {
            if !names.insert(def.name.to_ascii_lowercase()) {
                return Err(err(format!("duplicate landmark name \"{}\"", def.name)));
            }
        }

        let known = |id: LandmarkId| (1..=LANDMARK_COUNT).contains(&id.0);

        let mut normalized = BTreeSet::new();
        for &(a, b) in &edges {
            if !known(a) || !known(b) {
                return Err(err(format!("edge [{}, {}] references an unknown landmark", a.0, b.0)));
            }
            if a == b {
                return Err(err(format!("self-loop edge on landmark {}", a.0)));
            }
            normalized.insert((a.min(b), a.max(b)));
        }
        let edges: Vec<_> = normalized.into_iter().collect();

        if critical_centers.is_empty() {
            return Err(err("at least one critical center is required".into()));
        }
        let mut seen = BTreeSet::new();
        let mut colors = BTreeSet::new();
        for c in &critical_centers {
            if !known(c.index) {
                return Err(err(format!("critical center {} is not a landmark", c.index.0)));
            }
            if !seen.insert(c.index) {
                return Err(err(format!("critical center {} listed twice", c.index.0)));
            }
            if !colors.insert(c.rgb) {
                return Err(err(format!(
                    "critical center colors must be pairwise distinct; {:?} repeats",
                    c.rgb
                )));
            }
        }

        let mut constraint_names = BTreeSet::new();
        for c in &constraints {
            if !constraint_names.insert(c.name.clone()) {
                return Err(err(format!("duplicate constraint \"{}\"", c.name)));
            }
            for id in [c.vertex, c.ray_a, c.ray_b].iter().chain(&c.coupled) {
                if !known(*id) {
                    return Err(err(format!(
                        "constraint \"{}\" references unknown landmark {}",
                        c.name, id.0
                    )));
                }
            }
            if c.vertex == c.ray_a || c.vertex == c.ray_b || c.ray_a == c.ray_b {
                return Err(err(format!(
                    "constraint \"{}\": vertex, ray_a and ray_b must be distinct",
                    c.name
                )));
            }
            if !(c.min_deg.is_finite() && c.max_deg.is_finite() && c.min_deg < c.max_deg) {
                return Err(err(format!(
                    "constraint \"{}\": min_deg must be < max_deg (got {} and {})",
                    c.name, c.min_deg, c.max_deg
                )));
            }
            if c.min_deg < 0.0 || c.max_deg > 180.0 {
                return Err(err(format!(
                    "constraint \"{}\": range must lie within [0, 180] degrees",
                    c.name
                )));
            }
            if c.coupled.contains(&c.vertex) || c.coupled.contains(&c.ray_a) {
                return Err(err(format!(
                    "constraint \"{}\": coupled set must exclude vertex and ray_a",
                    c.name
                )));
            }
        }

        for (key, group) in &neighbor_groups {
            if let Some(bad) = std::iter::once(key).chain(group).find(|id| !known(**id)) {
                return Err(err(format!("neighbor group references unknown landmark {}", bad.0)));
            }
        }

        let schema = Self {
            landmarks,
            edges,
            critical_centers,
            constraints,
            neighbor_groups,
        };
        schema.check_connected()?;
        Ok(schema)
    }

    fn check_connected(&self) -> Result<()> {
        let reached = self.reachable_from(LandmarkId(1));
        if reached.len() == LANDMARK_COUNT as usize {
            return Ok(());
        }
        let component = reached.iter().map(|id| id.0.to_string()).collect::<Vec<_>>();
        let missing = LandmarkId::all()
            .filter(|id| !reached.contains(id))
            .map(|id| id.0.to_string())
            .collect::<Vec<_>>();
        Err(CephError::invariant(
            "schema",
            format!(
                "graph disconnected: component {{{}}} does not reach {{{}}}",
                component.join(", "),
                missing.join(", ")
            ),
        ))
    }

    /// Breadth-first reachability over the anatomical graph.
    pub fn reachable_from(&self, start: LandmarkId) -> BTreeSet<LandmarkId> {
        let adj = self.adjacency();
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start.slot()]);
        while let Some(v) = queue.pop_front() {
            for &u in &adj[v] {
                if seen.insert(LandmarkId(u as u8 + 1)) {
                    queue.push_back(u);
                }
            }
        }
        seen
    }

    /// Zero-based adjacency lists, neighbours in ascending order.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); LANDMARK_COUNT as usize];
        for &(a, b) in &self.edges {
            adj[a.slot()].push(b.slot());
            adj[b.slot()].push(a.slot());
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn landmarks(&self) -> &[LandmarkDef] {
        &self.landmarks
    }

    pub fn name(&self, id: LandmarkId) -> &str {
        &self.landmarks[id.slot()].name
    }

    pub fn edges(&self) -> &[(LandmarkId, LandmarkId)] {
        &self.edges
    }

    pub fn critical_centers(&self) -> &[CriticalCenter] {
        &self.critical_centers
    }

    pub fn constraints(&self) -> &[AngleConstraint] {
        &self.constraints
    }

    pub fn constraint(&self, name: &str) -> Option<&AngleConstraint> {
        self.constraints.iter().find(|c| c.name == name)
    }

    pub fn neighbor_groups(&self) -> &BTreeMap<LandmarkId, BTreeSet<LandmarkId>> {
        &self.neighbor_groups
    }

    /// Copy of the schema keeping only the named constraints.
    pub fn with_constraints(&self, names: &[&str]) -> Result<Self> {
        for name in names {
            if self.constraint(name).is_none() {
                return Err(CephError::Config(format!("unknown constraint \"{name}\"")));
            }
        }
        let mut copy = self.clone();
        copy.constraints.retain(|c| names.contains(&c.name.as_str()));
        Ok(copy)
    }

    pub fn to_json(&self) -> String {
        let file = SchemaFile {
            landmarks: self.landmarks.clone(),
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
            critical_centers: self.critical_centers.clone(),
            constraints: self
                .constraints
                .iter()
                .map(|c| ConstraintFile {
                    name: c.name.clone(),
                    vertex: c.vertex,
                    ray_a: c.ray_a,
                    ray_b: c.ray_b,
                    min_deg: c.min_deg,
                    max_deg: c.max_deg,
                    coupled: Some(c.coupled.clone()),
                })
                .collect(),
            neighbor_groups: self.neighbor_groups.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("schema serialises");
        s.push('\n');
        s
    }
}

/// Reads and validates a schema file.
pub fn load_schema(path: &Path) -> Result<AnatomySchema> {
    let text = std::fs::read_to_string(path).map_err(|e| CephError::io(path, e))?;
    AnatomySchema::from_json_str(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_file() -> SchemaFile {
        serde_json::from_str(DEFAULT_SCHEMA).unwrap()
    }

    #[test]
    fn default_schema_shape() {
        let schema = AnatomySchema::default_schema();
        assert_eq!(schema.landmarks().len(), 38);
        let centers: Vec<u8> = schema.critical_centers().iter().map(|c| c.index.0).collect();
        assert_eq!(centers, vec![2, 4, 11, 12, 17]);
        assert_eq!(schema.name(LandmarkId(1)), "Sella");
        assert_eq!(schema.name(LandmarkId(2)), "Nasion");
        assert_eq!(schema.name(LandmarkId(5)), "Subspinale");
        let sna = schema.constraint("SNA").unwrap();
        assert_eq!((sna.min_deg, sna.max_deg), (79.0, 83.0));
        assert_eq!((sna.vertex, sna.ray_a, sna.ray_b), (LandmarkId(2), LandmarkId(1), LandmarkId(5)));
        assert_eq!(schema.constraints().len(), 6);
    }

    #[test]
    fn every_landmark_reachable_from_every_start() {
        let schema = AnatomySchema::default_schema();
        for id in LandmarkId::all() {
            assert_eq!(schema.reachable_from(id).len(), 38, "start {id}");
        }
    }

    #[test]
    fn zero_edges_is_disconnected() {
        let mut file = default_file();
        file.edges.clear();
        let err = AnatomySchema::from_file(file).unwrap_err().to_string();
        assert!(err.contains("graph disconnected"), "{err}");
    }

    #[test]
    fn dropping_a_bridge_names_the_component() {
        let mut file = default_file();
        // Cervical point hangs off soft-tissue menton only.
        file.edges.retain(|[a, b]| a.0 != 38 && b.0 != 38);
        let err = AnatomySchema::from_file(file).unwrap_err().to_string();
        assert!(err.contains("does not reach {38}"), "{err}");
    }

    #[test]
    fn rejects_duplicate_colors_and_bad_ranges() {
        let mut file = default_file();
        file.critical_centers[1].rgb = file.critical_centers[0].rgb;
        assert!(AnatomySchema::from_file(file).unwrap_err().to_string().contains("distinct"));

        let mut file = default_file();
        file.constraints[0].min_deg = 90.0;
        file.constraints[0].max_deg = 80.0;
        assert!(AnatomySchema::from_file(file).unwrap_err().to_string().contains("min_deg"));

        let mut file = default_file();
        file.constraints[0].coupled = Some(BTreeSet::from([LandmarkId(1)]));
        assert!(AnatomySchema::from_file(file).unwrap_err().to_string().contains("coupled"));
    }

    #[test]
    fn rejects_missing_landmark_and_bad_index() {
        let mut file = default_file();
        file.landmarks.pop();
        assert!(AnatomySchema::from_file(file).is_err());

        let mut file = default_file();
        file.landmarks[3].index = LandmarkId(39);
        assert!(AnatomySchema::from_file(file).unwrap_err().to_string().contains("contiguous"));
    }

    #[test]
    fn parse_error_names_field() {
        let text = DEFAULT_SCHEMA.replacen("\"min_deg\"", "\"min_degrees\"", 1);
        let err = AnatomySchema::from_json_str(&text, "schema.json").unwrap_err().to_string();
        assert!(err.contains("min_degrees") && err.contains("line"), "{err}");
    }

    #[test]
    fn omitted_coupled_falls_back_to_neighbor_group() {
        let mut file = default_file();
        let ray_b = file.constraints[0].ray_b;
        file.constraints[0].coupled = None;
        let expected = file.neighbor_groups.get(&ray_b).cloned().unwrap_or_default();
        let schema = AnatomySchema::from_file(file).unwrap();
        assert_eq!(schema.constraints()[0].coupled, expected);
    }

    #[test]
    fn json_round_trip_preserves_schema() {
        let schema = AnatomySchema::default_schema();
        let again = AnatomySchema::from_json_str(&schema.to_json(), "rt").unwrap();
        assert_eq!(schema, again);
    }
}
