//! Synthesis route trees and their compact string grammar.
//!
//! A route is a finite tree of molecule strings. The root is the target
//! compound, leaves are starting materials. Serialization is a single line
//! with no whitespace:
//!
//! ```text
//! {'smiles':'CCO','children':[{'smiles':'CC'},{'smiles':'O'}]}
//! ```
//!
//! Leaves omit the `children` key entirely, so parse/serialize round-trip on
//! exactly one textual form per tree. Molecule strings may not contain the
//! structural delimiters `{ } [ ] ' : ,` or whitespace; everything else is
//! opaque to this module.

use std::collections::HashSet;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Characters reserved by the route string grammar.
pub const DELIMITERS: [char; 7] = ['{', '}', '[', ']', '\'', ':', ','];

/// Errors from route construction and parsing.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RouteError {
    #[error("molecule string is empty")]
    EmptySmiles,
    #[error("molecule string contains structural delimiter {0:?}")]
    DelimiterInSmiles(char),
    #[error("molecule string contains whitespace {0:?}")]
    WhitespaceInSmiles(char),
    #[error("syntax error at byte {position}: expected {expected}")]
    Syntax { position: usize, expected: String },
}

impl RouteError {
    fn syntax(position: usize, expected: impl Into<String>) -> Self {
        RouteError::Syntax {
            position,
            expected: expected.into(),
        }
    }
}

fn check_smiles(smiles: &str) -> Result<(), RouteError> {
    if smiles.is_empty() {
        return Err(RouteError::EmptySmiles);
    }
    for c in smiles.chars() {
        if DELIMITERS.contains(&c) {
            return Err(RouteError::DelimiterInSmiles(c));
        }
        // Serialized routes carry no whitespace, so molecule strings cannot either.
        if c.is_whitespace() {
            return Err(RouteError::WhitespaceInSmiles(c));
        }
    }
    Ok(())
}

/// A node in a synthesis route tree. Leaves have no children.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RouteNode {
    smiles: String,
    children: Vec<RouteNode>,
}

impl RouteNode {
    /// Internal node with the given precursors. Validates the molecule string.
    pub fn new(smiles: impl Into<String>, children: Vec<RouteNode>) -> Result<Self, RouteError> {
        let smiles = smiles.into();
        check_smiles(&smiles)?;
        Ok(RouteNode { smiles, children })
    }

    /// Leaf node (starting material).
    pub fn leaf(smiles: impl Into<String>) -> Result<Self, RouteError> {
        Self::new(smiles, Vec::new())
    }

    pub fn smiles(&self) -> &str {
        &self.smiles
    }

    pub fn children(&self) -> &[RouteNode] {
        &self.children
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Number of nodes in the tree.
    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(RouteNode::node_count).sum::<usize>()
    }

    /// Tree height in edges: the largest number of reactions from a starting
    /// material up to this node. 0 for a leaf.
    pub fn step_count(&self) -> usize {
        self.children
            .iter()
            .map(|c| 1 + c.step_count())
            .max()
            .unwrap_or(0)
    }

    /// All leaf molecule strings paired with their edge-depth, in pre-order.
    pub fn leaves(&self) -> Vec<(&str, usize)> {
        let mut out = Vec::new();
        self.collect_leaves(0, &mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, depth: usize, out: &mut Vec<(&'a str, usize)>) {
        if self.children.is_empty() {
            out.push((&self.smiles, depth));
        } else {
            for c in &self.children {
                c.collect_leaves(depth + 1, out);
            }
        }
    }

    /// The starting material at maximal depth. Ties are broken by the
    /// lexicographically smallest molecule string (byte order).
    pub fn deepest_leaf(&self) -> &str {
        self.leaves()
            .into_iter()
            .max_by(|(a_s, a_d), (b_s, b_d)| a_d.cmp(b_d).then(b_s.cmp(a_s)))
            .map(|(s, _)| s)
            .expect("tree has at least one leaf")
    }

    /// Pre-order traversal of all nodes.
    pub fn iter_preorder(&self) -> impl Iterator<Item = &RouteNode> {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let node = stack.pop()?;
            for c in node.children.iter().rev() {
                stack.push(c);
            }
            Some(node)
        })
    }

    /// Canonical representative of this route's permutation class: children
    /// at every node sorted by the canonical serialization of their subtree,
    /// ascending byte order. Idempotent.
    pub fn canonicalize(&self) -> RouteNode {
        let mut children: Vec<RouteNode> =
            self.children.iter().map(RouteNode::canonicalize).collect();
        children.sort_by(|a, b| a.serialize_unchecked().cmp(&b.serialize_unchecked()));
        RouteNode {
            smiles: self.smiles.clone(),
            children,
        }
    }

    /// Canonical serialization, usable as a permutation-class key.
    pub fn canonical_string(&self) -> String {
        self.canonicalize().serialize_unchecked()
    }

    fn serialize_into(&self, out: &mut String) {
        out.push_str("{'smiles':'");
        out.push_str(&self.smiles);
        out.push('\'');
        if !self.children.is_empty() {
            out.push_str(",'children':[");
            for (i, c) in self.children.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                c.serialize_into(out);
            }
            out.push(']');
        }
        out.push('}');
    }

    fn serialize_unchecked(&self) -> String {
        let mut s = String::new();
        self.serialize_into(&mut s);
        s
    }

    /// Up to `limit` distinct reorderings of this tree, each different from
    /// the input and from one another under exact serialization.
    ///
    /// Enumeration is deterministic: assignments of one child ordering per
    /// node, nodes indexed in pre-order, advanced in lexicographic order with
    /// the last node varying fastest; per-node orderings run through index
    /// permutations in lexicographic order starting at the identity.
    pub fn permutations(&self, limit: usize) -> Vec<RouteNode> {
        if limit == 0 {
            return Vec::new();
        }
        let arities: Vec<usize> = self.iter_preorder().map(|n| n.children.len()).collect();
        let mut state: Vec<Vec<usize>> = arities.iter().map(|&k| (0..k).collect()).collect();
        let original = self.serialize_unchecked();
        let mut seen: HashSet<String> = HashSet::new();
        seen.insert(original);
        let mut out = Vec::new();
        while advance(&mut state) {
            let tree = self.apply_orderings(&state);
            let key = tree.serialize_unchecked();
            if seen.insert(key) {
                out.push(tree);
                if out.len() == limit {
                    break;
                }
            }
        }
        out
    }

    /// Rebuild the tree with the given per-node child orderings (pre-order
    /// indexed, matching `permutations`).
    fn apply_orderings(&self, orderings: &[Vec<usize>]) -> RouteNode {
        let mut cursor = 0;
        self.apply_orderings_inner(orderings, &mut cursor)
    }

    fn apply_orderings_inner(&self, orderings: &[Vec<usize>], cursor: &mut usize) -> RouteNode {
        let order = &orderings[*cursor];
        *cursor += 1;
        // Children must be rebuilt in original pre-order so the cursor lines
        // up, then placed according to the ordering.
        let rebuilt: Vec<RouteNode> = self
            .children
            .iter()
            .map(|c| c.apply_orderings_inner(orderings, cursor))
            .collect();
        let mut placed = Vec::with_capacity(rebuilt.len());
        for &idx in order {
            placed.push(rebuilt[idx].clone());
        }
        RouteNode {
            smiles: self.smiles.clone(),
            children: placed,
        }
    }
}

/// Advance the ordering assignment to its lexicographic successor; false once
/// exhausted. The last node varies fastest; earlier nodes reset to identity.
fn advance(state: &mut [Vec<usize>]) -> bool {
    for i in (0..state.len()).rev() {
        if next_permutation(&mut state[i]) {
            for later in state[i + 1..].iter_mut() {
                later.sort_unstable();
            }
            return true;
        }
    }
    false
}

/// Standard lexicographic next-permutation. Wraps to the identity and returns
/// false when the input is already the last permutation.
fn next_permutation(perm: &mut [usize]) -> bool {
    if perm.len() < 2 {
        return false;
    }
    let mut i = perm.len() - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        perm.sort_unstable();
        return false;
    }
    let mut j = perm.len() - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// A serialized route: single line, no whitespace, parseable back to the
/// exact tree that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RouteString(String);

impl RouteString {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl std::fmt::Display for RouteString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for RouteString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for RouteString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse(&text).map_err(D::Error::custom)?;
        Ok(RouteString(text))
    }
}

/// Serialize a route tree to its compact string form.
pub fn serialize(root: &RouteNode) -> Result<RouteString, RouteError> {
    for node in root.iter_preorder() {
        check_smiles(&node.smiles)?;
    }
    Ok(RouteString(root.serialize_unchecked()))
}

/// Parse a compact route string. Inverse of [`serialize`] on its image;
/// rejects whitespace, explicit empty child lists, and trailing garbage.
pub fn parse(text: &str) -> Result<RouteNode, RouteError> {
    let bytes = text.as_bytes();
    let mut pos = 0;
    let node = parse_node(bytes, &mut pos)?;
    if pos != bytes.len() {
        return Err(RouteError::syntax(pos, "end of input"));
    }
    Ok(node)
}

fn expect(bytes: &[u8], pos: &mut usize, lit: &str) -> Result<(), RouteError> {
    if bytes[*pos..].starts_with(lit.as_bytes()) {
        *pos += lit.len();
        Ok(())
    } else {
        Err(RouteError::syntax(*pos, format!("`{lit}`")))
    }
}

fn parse_node(bytes: &[u8], pos: &mut usize) -> Result<RouteNode, RouteError> {
    expect(bytes, pos, "{'smiles':'")?;
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos] != b'\'' {
        let c = bytes[*pos] as char;
        if DELIMITERS.contains(&c) || c.is_whitespace() {
            return Err(RouteError::syntax(*pos, "molecule character"));
        }
        *pos += 1;
    }
    if *pos >= bytes.len() {
        return Err(RouteError::syntax(*pos, "closing `'`"));
    }
    if *pos == start {
        return Err(RouteError::syntax(*pos, "non-empty molecule string"));
    }
    // Delimiters were excluded above, so this is valid by construction.
    let smiles = std::str::from_utf8(&bytes[start..*pos])
        .map_err(|_| RouteError::syntax(start, "UTF-8 molecule string"))?
        .to_string();
    *pos += 1; // closing quote
    let mut children = Vec::new();
    if bytes.get(*pos) == Some(&b',') {
        expect(bytes, pos, ",'children':[")?;
        loop {
            children.push(parse_node(bytes, pos)?);
            match bytes.get(*pos) {
                Some(b',') => *pos += 1,
                Some(b']') => {
                    *pos += 1;
                    break;
                }
                _ => return Err(RouteError::syntax(*pos, "`,` or `]`")),
            }
        }
    }
    expect(bytes, pos, "}")?;
    RouteNode::new(smiles, children)
}

/// Stock of purchasable compounds; membership is exact string equality after
/// whitespace trimming.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StockSet {
    molecules: HashSet<String>,
}

impl StockSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, molecule: &str) {
        self.molecules.insert(molecule.trim().to_string());
    }

    pub fn contains(&self, molecule: &str) -> bool {
        self.molecules.contains(molecule.trim())
    }

    pub fn len(&self) -> usize {
        self.molecules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.molecules.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.molecules.iter().map(String::as_str)
    }

    /// One molecule per line, UTF-8; blank lines ignored.
    pub fn from_lines(text: &str) -> Self {
        let mut stock = StockSet::new();
        for line in text.lines() {
            if !line.trim().is_empty() {
                stock.insert(line);
            }
        }
        stock
    }

    /// Newline-delimited form, sorted for reproducibility.
    pub fn to_lines(&self) -> String {
        let mut mols: Vec<&str> = self.molecules.iter().map(String::as_str).collect();
        mols.sort_unstable();
        let mut out = String::new();
        for m in mols {
            out.push_str(m);
            out.push('\n');
        }
        out
    }
}

impl FromIterator<String> for StockSet {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        let mut stock = StockSet::new();
        for m in iter {
            stock.insert(&m);
        }
        stock
    }
}

/// Mirror of the on-disk JSON object: `smiles` plus optional `children`.
/// Unknown keys are ignored so metadata-bearing exports load unchanged.
#[derive(Serialize, Deserialize)]
struct RawRoute {
    smiles: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    children: Vec<RawRoute>,
}

impl TryFrom<RawRoute> for RouteNode {
    type Error = RouteError;

    fn try_from(raw: RawRoute) -> Result<Self, RouteError> {
        let children = raw
            .children
            .into_iter()
            .map(RouteNode::try_from)
            .collect::<Result<Vec<_>, _>>()?;
        RouteNode::new(raw.smiles, children)
    }
}

impl From<&RouteNode> for RawRoute {
    fn from(node: &RouteNode) -> Self {
        RawRoute {
            smiles: node.smiles.clone(),
            children: node.children.iter().map(RawRoute::from).collect(),
        }
    }
}

impl Serialize for RouteNode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        RawRoute::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RouteNode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawRoute::deserialize(deserializer)?;
        RouteNode::try_from(raw).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn leaf(s: &str) -> RouteNode {
        RouteNode::leaf(s).unwrap()
    }

    pub(crate) fn node(s: &str, children: Vec<RouteNode>) -> RouteNode {
        RouteNode::new(s, children).unwrap()
    }

    #[test]
    fn serialize_leaf() {
        assert_eq!(serialize(&leaf("CC")).unwrap().as_str(), "{'smiles':'CC'}");
    }

    #[test]
    fn serialize_one_step() {
        let root = node("CCO", vec![leaf("CC"), leaf("O")]);
        assert_eq!(
            serialize(&root).unwrap().as_str(),
            "{'smiles':'CCO','children':[{'smiles':'CC'},{'smiles':'O'}]}"
        );
    }

    #[test]
    fn construction_rejects_bad_smiles() {
        assert_eq!(RouteNode::leaf(""), Err(RouteError::EmptySmiles));
        assert_eq!(
            RouteNode::leaf("C{C"),
            Err(RouteError::DelimiterInSmiles('{'))
        );
        assert_eq!(
            RouteNode::leaf("C C"),
            Err(RouteError::WhitespaceInSmiles(' '))
        );
        for d in DELIMITERS {
            assert!(RouteNode::leaf(format!("C{d}")).is_err());
        }
    }

    #[test]
    fn parse_leaf() {
        assert_eq!(parse("{'smiles':'CC'}").unwrap(), leaf("CC"));
    }

    #[test]
    fn parse_rejects_explicit_empty_children() {
        let err = parse("{'smiles':'C','children':[]}").unwrap_err();
        assert!(matches!(err, RouteError::Syntax { .. }), "{err:?}");
    }

    #[test]
    fn parse_rejects_truncation() {
        let err = parse("{'smiles':'C'").unwrap_err();
        match err {
            RouteError::Syntax { position, .. } => assert_eq!(position, 13),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_trailing_garbage() {
        assert!(parse("{'smiles':'C'}x").is_err());
        assert!(parse("{'smiles':'C'} ").is_err());
    }

    #[test]
    fn parse_rejects_whitespace_and_empty_smiles() {
        assert!(parse("{'smiles': 'C'}").is_err());
        assert!(parse("{'smiles':''}").is_err());
    }

    #[test]
    fn step_count_examples() {
        assert_eq!(leaf("C").step_count(), 0);
        assert_eq!(node("A", vec![leaf("B"), leaf("C")]).step_count(), 1);
        let chain = node("A", vec![node("B", vec![leaf("C")]), leaf("D")]);
        assert_eq!(chain.step_count(), 2);
    }

    #[test]
    fn leaves_and_depths() {
        assert_eq!(leaf("C").leaves(), vec![("C", 0)]);
        let t = node(
            "A",
            vec![node("B", vec![leaf("C"), leaf("D")]), leaf("E")],
        );
        assert_eq!(t.leaves(), vec![("C", 2), ("D", 2), ("E", 1)]);
    }

    #[test]
    fn deepest_leaf_examples() {
        assert_eq!(leaf("C").deepest_leaf(), "C");
        let t = node("A", vec![node("B", vec![leaf("N")]), leaf("O")]);
        assert_eq!(t.deepest_leaf(), "N");
        // Tie at max depth: lexicographically smallest molecule wins.
        let tie = node("R", vec![leaf("B"), leaf("A")]);
        assert_eq!(tie.deepest_leaf(), "A");
    }

    #[test]
    fn canonicalize_sorts_and_is_idempotent() {
        let t = node("R", vec![leaf("O"), leaf("C")]);
        let c = t.canonicalize();
        assert_eq!(
            serialize(&c).unwrap().as_str(),
            "{'smiles':'R','children':[{'smiles':'C'},{'smiles':'O'}]}"
        );
        assert_eq!(c.canonicalize(), c);
    }

    #[test]
    fn permutations_counts() {
        assert!(leaf("C").permutations(5).is_empty());
        let two = node("R", vec![leaf("A"), leaf("B")]);
        let perms = two.permutations(2);
        assert_eq!(perms.len(), 1);
        assert_eq!(
            serialize(&perms[0]).unwrap().as_str(),
            "{'smiles':'R','children':[{'smiles':'B'},{'smiles':'A'}]}"
        );
        let three = node("R", vec![leaf("A"), leaf("B"), leaf("C")]);
        assert_eq!(three.permutations(10).len(), 5);
        assert_eq!(three.permutations(3).len(), 3);
    }

    #[test]
    fn permutations_of_duplicate_children_dedup() {
        let t = node("R", vec![leaf("A"), leaf("A")]);
        assert!(t.permutations(10).is_empty());
    }

    #[test]
    fn permutations_are_deterministic_and_exclude_identity() {
        let t = node(
            "R",
            vec![node("S", vec![leaf("A"), leaf("B")]), leaf("C")],
        );
        let a = t.permutations(10);
        let b = t.permutations(10);
        assert_eq!(a, b);
        let original = serialize(&t).unwrap();
        for p in &a {
            assert_ne!(serialize(p).unwrap(), original);
        }
        // Two orderable nodes with 2 and 2! choices: 2*2 - 1 = 3 permutations.
        assert_eq!(a.len(), 3);
    }

    #[test]
    fn stock_set_trims() {
        let mut s = StockSet::new();
        s.insert("  CC \n");
        assert!(s.contains("CC"));
        assert!(s.contains(" CC "));
        assert!(!s.contains("C"));
    }

    #[test]
    fn json_roundtrip_and_leaf_key_omission() {
        let t = node("A", vec![leaf("B")]);
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(json, r#"{"smiles":"A","children":[{"smiles":"B"}]}"#);
        let back: RouteNode = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn json_rejects_invalid_smiles() {
        let res: Result<RouteNode, _> = serde_json::from_str(r#"{"smiles":"a b"}"#);
        assert!(res.is_err());
    }
}
