//! Prompt generation by conditional permutation over three keyword groups
//! (image style, character, attribute) with forbidden co-occurrence rules.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CephError, Result};
use crate::rng::{slot_rng, DOMAIN_PROMPT};

const DEFAULT_LEXICON: &str = include_str!("../data/default_lexicon.json");

/// Draws per prompt before falling back to sampling from the enumerated set.
const MAX_DRAWS: usize = 10_000;
/// Largest valid-prompt space that is materialised for exact sampling.
const MATERIALISE_LIMIT: u128 = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    ImageStyle,
    Character,
    Attribute,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::ImageStyle => "image style",
            Group::Character => "character",
            Group::Attribute => "attribute",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LexiconFile {
    image_style: Vec<String>,
    character: Vec<String>,
    #[serde(default)]
    attribute: Vec<String>,
    #[serde(default)]
    rules: Vec<[String; 2]>,
    #[serde(default = "default_pick")]
    attribute_pick: [usize; 2],
}

fn default_pick() -> [usize; 2] {
    [0, 4]
}

/// Grouped keyword vocabulary plus forbidden pairs. Phrases compare
/// case-insensitively.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptLexicon {
    image_style: Vec<String>,
    character: Vec<String>,
    attribute: Vec<String>,
    rules: Vec<[String; 2]>,
    attribute_pick: [usize; 2],
    // Phrase id space: styles, then characters, then attributes.
    lookup: HashMap<String, usize>,
    forbidden: HashSet<(usize, usize)>,
}

fn key(phrase: &str) -> String {
    phrase.trim().to_lowercase()
}

impl PromptLexicon {
    pub fn new(
        image_style: Vec<String>,
        character: Vec<String>,
        attribute: Vec<String>,
        rules: Vec<[String; 2]>,
        attribute_pick: [usize; 2],
    ) -> Result<Self> {
        let err = |m: String| CephError::invariant("lexicon", m);
        if image_style.is_empty() {
            return Err(err("image_style group is empty".into()));
        }
        if character.is_empty() {
            return Err(err("character group is empty".into()));
        }
        let mut lookup = HashMap::new();
        for (i, phrase) in image_style.iter().chain(&character).chain(&attribute).enumerate() {
            if phrase.trim().is_empty() || phrase.contains(',') {
                return Err(err(format!("phrase \"{phrase}\" must be non-empty and contain no comma")));
            }
            if lookup.insert(key(phrase), i).is_some() {
                return Err(err(format!("phrase \"{phrase}\" appears more than once; groups must be disjoint")));
            }
        }
        let mut forbidden = HashSet::new();
        for [a, b] in &rules {
            let (Some(&ia), Some(&ib)) = (lookup.get(&key(a)), lookup.get(&key(b))) else {
                return Err(err(format!("rule (\"{a}\", \"{b}\") names a phrase missing from every group")));
            };
            if ia == ib {
                return Err(err(format!("rule pairs \"{a}\" with itself")));
            }
            forbidden.insert((ia.min(ib), ia.max(ib)));
        }
        let [lo, hi] = attribute_pick;
        if lo > hi || hi > attribute.len() {
            return Err(err(format!(
                "attribute_pick [{lo}, {hi}] must satisfy 0 <= min <= max <= {}",
                attribute.len()
            )));
        }
        Ok(Self { image_style, character, attribute, rules, attribute_pick, lookup, forbidden })
    }

    pub fn default_lexicon() -> Self {
        Self::from_json_str(DEFAULT_LEXICON, "default lexicon").expect("bundled lexicon is valid")
    }

    pub fn from_json_str(text: &str, context: &str) -> Result<Self> {
        let f: LexiconFile = serde_json::from_str(text).map_err(|e| CephError::json(context, e))?;
        Self::new(f.image_style, f.character, f.attribute, f.rules, f.attribute_pick)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CephError::io(path, e))?;
        Self::from_json_str(&text, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        let f = LexiconFile {
            image_style: self.image_style.clone(),
            character: self.character.clone(),
            attribute: self.attribute.clone(),
            rules: self.rules.clone(),
            attribute_pick: self.attribute_pick,
        };
        let mut s = serde_json::to_string_pretty(&f).expect("lexicon serialises");
        s.push('\n');
        s
    }

    pub fn image_style(&self) -> &[String] {
        &self.image_style
    }

    pub fn character(&self) -> &[String] {
        &self.character
    }

    pub fn attribute(&self) -> &[String] {
        &self.attribute
    }

    pub fn rules(&self) -> &[[String; 2]] {
        &self.rules
    }

    pub fn attribute_pick(&self) -> [usize; 2] {
        self.attribute_pick
    }

    pub fn phrase_count(&self) -> usize {
        self.lookup.len()
    }

    fn n_style(&self) -> usize {
        self.image_style.len()
    }

    fn attr_base(&self) -> usize {
        self.image_style.len() + self.character.len()
    }

    fn phrase(&self, id: usize) -> &str {
        let (s, c) = (self.image_style.len(), self.character.len());
        if id < s {
            &self.image_style[id]
        } else if id < s + c {
            &self.character[id - s]
        } else {
            &self.attribute[id - s - c]
        }
    }

    fn group_of(&self, id: usize) -> Group {
        if id < self.n_style() {
            Group::ImageStyle
        } else if id < self.attr_base() {
            Group::Character
        } else {
            Group::Attribute
        }
    }

    fn is_forbidden(&self, a: usize, b: usize) -> bool {
        self.forbidden.contains(&(a.min(b), a.max(b)))
    }

    fn draw_ok(&self, draw: &Draw) -> bool {
        let ids = draw.ids(self);
        ids.iter()
            .enumerate()
            .all(|(i, &a)| ids[i + 1..].iter().all(|&b| !self.is_forbidden(a, b)))
    }

    fn prompt(&self, draw: &Draw) -> Prompt {
        Prompt::from_parts(
            self.image_style[draw.style].clone(),
            self.character[draw.character].clone(),
            draw.attributes.iter().map(|&a| self.attribute[a].clone()).collect(),
        )
    }
}

/// A selection by index: style, character and ascending attribute indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Draw {
    style: usize,
    character: usize,
    attributes: Vec<usize>,
}

impl Draw {
    fn ids(&self, lex: &PromptLexicon) -> Vec<usize> {
        let base = lex.attr_base();
        let mut ids = vec![self.style, lex.n_style() + self.character];
        ids.extend(self.attributes.iter().map(|a| base + a));
        ids
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Prompt {
    pub text: String,
    pub style: String,
    pub character: String,
    pub attributes: Vec<String>,
}

impl Prompt {
    /// Joins style, character and attributes with ", ".
    pub fn from_parts(style: String, character: String, attributes: Vec<String>) -> Self {
        let mut parts = vec![style.as_str(), character.as_str()];
        parts.extend(attributes.iter().map(String::as_str));
        let text = parts.join(", ");
        Self { text, style, character, attributes }
    }

    /// Splits a comma-separated prompt positionally: style, character,
    /// then attributes. Empty fragments (e.g. a trailing comma) are dropped.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<String> = text
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        if parts.len() < 2 {
            return Err(CephError::Parse {
                context: "prompt".into(),
                message: format!("\"{text}\" needs at least a style and a character phrase"),
            });
        }
        let mut it = parts.into_iter();
        let style = it.next().unwrap();
        let character = it.next().unwrap();
        Ok(Self::from_parts(style, character, it.collect()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PromptViolation {
    ForbiddenPair { a: String, b: String },
    UnknownPhrase { phrase: String },
    WrongGroup { phrase: String, expected: Group, found: Group },
    DuplicatePhrase { phrase: String },
    AttributeCount { count: usize, min: usize, max: usize },
}

impl fmt::Display for PromptViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PromptViolation::ForbiddenPair { a, b } => write!(f, "\"{a}\" must not be combined with \"{b}\""),
            PromptViolation::UnknownPhrase { phrase } => write!(f, "unknown phrase \"{phrase}\""),
            PromptViolation::WrongGroup { phrase, expected, found } => {
                write!(f, "\"{phrase}\" is a {found} phrase, expected {expected}")
            }
            PromptViolation::DuplicatePhrase { phrase } => write!(f, "\"{phrase}\" repeated"),
            PromptViolation::AttributeCount { count, min, max } => {
                write!(f, "{count} attributes outside pick range [{min}, {max}]")
            }
        }
    }
}

/// Every structural problem and forbidden pair in `p`; empty iff valid.
pub fn validate_prompt(p: &Prompt, lex: &PromptLexicon) -> Vec<PromptViolation> {
    let mut out = Vec::new();
    let slots = std::iter::once((&p.style, Group::ImageStyle))
        .chain(std::iter::once((&p.character, Group::Character)))
        .chain(p.attributes.iter().map(|a| (a, Group::Attribute)));
    let mut ids: Vec<usize> = Vec::new();
    for (phrase, expected) in slots {
        match lex.lookup.get(&key(phrase)) {
            None => out.push(PromptViolation::UnknownPhrase { phrase: phrase.clone() }),
            Some(&id) => {
                let found = lex.group_of(id);
                if found != expected {
                    out.push(PromptViolation::WrongGroup { phrase: phrase.clone(), expected, found });
                }
                if ids.contains(&id) {
                    out.push(PromptViolation::DuplicatePhrase { phrase: phrase.clone() });
                } else {
                    ids.push(id);
                }
            }
        }
    }
    let [lo, hi] = lex.attribute_pick;
    if p.attributes.len() < lo || p.attributes.len() > hi {
        out.push(PromptViolation::AttributeCount { count: p.attributes.len(), min: lo, max: hi });
    }
    for (i, &a) in ids.iter().enumerate() {
        for &b in &ids[i + 1..] {
            if lex.is_forbidden(a, b) {
                out.push(PromptViolation::ForbiddenPair {
                    a: lex.phrase(a).to_string(),
                    b: lex.phrase(b).to_string(),
                });
            }
        }
    }
    out
}

fn binomial_table(n: usize) -> Vec<Vec<u128>> {
    let mut c = vec![vec![0u128; n + 1]; n + 1];
    for i in 0..=n {
        c[i][0] = 1;
        for j in 1..=i {
            c[i][j] = c[i - 1][j - 1] + c[i - 1][j];
        }
    }
    c
}

/// Attributes allowed next to a given style and character.
fn allowed_attributes(lex: &PromptLexicon, style: usize, character: usize) -> Option<Vec<usize>> {
    let s = style;
    let c = lex.n_style() + character;
    if lex.is_forbidden(s, c) {
        return None;
    }
    let base = lex.attr_base();
    Some(
        (0..lex.attribute.len())
            .filter(|&a| !lex.is_forbidden(s, base + a) && !lex.is_forbidden(c, base + a))
            .collect(),
    )
}

/// Number of rule-free attribute subsets of `allowed`, by size.
fn independent_sets_by_size(lex: &PromptLexicon, allowed: &[usize], binom: &[Vec<u128>]) -> Vec<u128> {
    let base = lex.attr_base();
    let conflicts = |a: usize, b: usize| lex.is_forbidden(base + a, base + b);
    let (constrained, free): (Vec<usize>, Vec<usize>) = allowed
        .iter()
        .partition(|&&a| allowed.iter().any(|&b| b != a && conflicts(a, b)));

    // Enumerate independent subsets of the constrained part.
    let mut by_size = vec![0u128; constrained.len() + 1];
    fn walk(i: usize, chosen: &mut Vec<usize>, items: &[usize], ok: &dyn Fn(usize, usize) -> bool, acc: &mut [u128]) {
        if i == items.len() {
            acc[chosen.len()] += 1;
            return;
        }
        walk(i + 1, chosen, items, ok, acc);
        let x = items[i];
        if chosen.iter().all(|&y| ok(x, y)) {
            chosen.push(x);
            walk(i + 1, chosen, items, ok, acc);
            chosen.pop();
        }
    }
    walk(0, &mut Vec::new(), &constrained, &|a, b| !conflicts(a, b), &mut by_size);

    let f = free.len();
    let mut total = vec![0u128; allowed.len() + 1];
    for (j, &n) in by_size.iter().enumerate() {
        if n == 0 {
            continue;
        }
        for k in 0..=f {
            total[j + k] += n * binom[f][k];
        }
    }
    total
}

/// Exact number of distinct rule-satisfying prompts.
pub fn enumerate_valid(lex: &PromptLexicon) -> u128 {
    let binom = binomial_table(lex.attribute.len());
    let [lo, hi] = lex.attribute_pick;
    let mut cache: HashMap<Vec<usize>, u128> = HashMap::new();
    let mut total = 0u128;
    for s in 0..lex.image_style.len() {
        for c in 0..lex.character.len() {
            let Some(allowed) = allowed_attributes(lex, s, c) else { continue };
            let n = *cache.entry(allowed).or_insert_with_key(|allowed| {
                let sizes = independent_sets_by_size(lex, allowed, &binom);
                (lo..=hi.min(allowed.len())).map(|k| sizes[k]).sum()
            });
            total += n;
        }
    }
    total
}

/// Every rule-satisfying prompt, in (style, character, attribute-subset)
/// lexicographic order. Intended for small lexicons.
pub fn enumerate_all(lex: &PromptLexicon) -> Vec<Prompt> {
    all_draws(lex).iter().map(|d| lex.prompt(d)).collect()
}

fn all_draws(lex: &PromptLexicon) -> Vec<Draw> {
    let base = lex.attr_base();
    let [lo, hi] = lex.attribute_pick;
    let mut out = Vec::new();
    for s in 0..lex.image_style.len() {
        for c in 0..lex.character.len() {
            let Some(allowed) = allowed_attributes(lex, s, c) else { continue };
            let mut chosen = Vec::new();
            fn walk(
                i: usize,
                allowed: &[usize],
                chosen: &mut Vec<usize>,
                lo: usize,
                hi: usize,
                emit: &mut dyn FnMut(&[usize]),
                ok: &dyn Fn(usize, usize) -> bool,
            ) {
                if i == allowed.len() {
                    if chosen.len() >= lo {
                        emit(chosen);
                    }
                    return;
                }
                let x = allowed[i];
                if chosen.len() < hi && chosen.iter().all(|&y| ok(x, y)) {
                    chosen.push(x);
                    walk(i + 1, allowed, chosen, lo, hi, emit, ok);
                    chosen.pop();
                }
                walk(i + 1, allowed, chosen, lo, hi, emit, ok);
            }
            let mut emit = |attrs: &[usize]| {
                out.push(Draw { style: s, character: c, attributes: attrs.to_vec() });
            };
            walk(0, &allowed, &mut chosen, lo, hi, &mut emit, &|a, b| !lex.is_forbidden(base + a, base + b));
        }
    }
    out
}

fn random_draw<R: Rng>(lex: &PromptLexicon, rng: &mut R) -> Draw {
    let style = rng.gen_range(0..lex.image_style.len());
    let character = rng.gen_range(0..lex.character.len());
    let [lo, hi] = lex.attribute_pick;
    let k = rng.gen_range(lo..=hi);
    let mut attributes = sample(rng, lex.attribute.len(), k).into_vec();
    attributes.sort_unstable();
    Draw { style, character, attributes }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PromptOptions {
    /// Sample without replacement.
    pub distinct: bool,
}

/// Draws `count` rule-satisfying prompts.
///
/// Each draw picks one style, one character and a uniformly sized subset of
/// attributes; draws that break a rule are rejected and redrawn. Prompt `i`
/// uses its own stream derived from `(seed, i)`.
pub fn generate_prompts(lex: &PromptLexicon, count: usize, seed: u64) -> Result<Vec<Prompt>> {
    generate_prompts_with(lex, count, seed, PromptOptions::default())
}

pub fn generate_prompts_with(
    lex: &PromptLexicon,
    count: usize,
    seed: u64,
    opts: PromptOptions,
) -> Result<Vec<Prompt>> {
    if count == 0 {
        return Err(CephError::Config("prompt count must be >= 1".into()));
    }
    let total = enumerate_valid(lex);
    if total == 0 {
        return Err(CephError::Infeasible(
            "no combination of style, character and attributes satisfies the rules".into(),
        ));
    }
    let materialised = (total <= MATERIALISE_LIMIT).then(|| all_draws(lex));

    if opts.distinct {
        if count as u128 > total {
            return Err(CephError::Config(format!(
                "requested {count} distinct prompts but only {total} exist"
            )));
        }
        if let Some(mut draws) = materialised {
            let mut rng = slot_rng(seed, DOMAIN_PROMPT, u64::MAX);
            draws.shuffle(&mut rng);
            return Ok(draws[..count].iter().map(|d| lex.prompt(d)).collect());
        }
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(count);
        let mut slot = 0u64;
        while out.len() < count {
            let mut rng = slot_rng(seed, DOMAIN_PROMPT, slot);
            slot += 1;
            let draw = random_draw(lex, &mut rng);
            if lex.draw_ok(&draw) && seen.insert(draw.clone()) {
                out.push(lex.prompt(&draw));
            }
        }
        return Ok(out);
    }

    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = slot_rng(seed, DOMAIN_PROMPT, i as u64);
            for _ in 0..MAX_DRAWS {
                let draw = random_draw(lex, &mut rng);
                if lex.draw_ok(&draw) {
                    return Ok(lex.prompt(&draw));
                }
            }
            match &materialised {
                Some(draws) => Ok(lex.prompt(&draws[rng.gen_range(0..draws.len())])),
                None => Err(CephError::Infeasible(format!(
                    "no rule-satisfying draw within {MAX_DRAWS} attempts for prompt {i}"
                ))),
            }
        })
        .collect()
}

/// Distinct prompt texts in a batch.
pub fn distinct_texts(prompts: &[Prompt]) -> BTreeSet<&str> {
    prompts.iter().map(|p| p.text.as_str()).collect()
}
