//! Syntactic SMILES validation.
//!
//! A deliberately chemistry-free check used by the post-beam validity filter:
//! character alphabet, balanced parentheses and brackets, paired ring-closure
//! labels, no bond symbol at the string boundaries, and a recognizable
//! element symbol inside every bracket atom. No valence or aromaticity
//! reasoning; two chemically identical but textually different strings are
//! different to this module.
//!
//! Outside brackets only the organic subset `B C N O P S F Cl Br I` and the
//! aromatic forms `b c n o p s` are accepted; inside brackets any IUPAC
//! element symbol plus the aromatic bracket forms `b c n o p s se as`.

use crate::route::RouteNode;

/// Why a position failed the lint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    Empty,
    InvalidChar,
    UnbalancedParen,
    UnbalancedBracket,
    UnclosedRing,
    BondAtBoundary,
    BadBracketAtom,
    BadRingLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct LintIssue {
    pub position: usize,
    pub kind: IssueKind,
    pub detail: String,
}

/// Outcome of linting one string or one route tree.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct LintReport {
    pub valid: bool,
    pub issues: Vec<LintIssue>,
}

impl LintReport {
    fn from_issues(issues: Vec<LintIssue>) -> Self {
        LintReport {
            valid: issues.is_empty(),
            issues,
        }
    }
}

const BONDS: [u8; 5] = [b'-', b'=', b'#', b'/', b'\\'];

/// Two-character organic-subset symbols checked before single characters.
const ORGANIC_TWO: [&str; 2] = ["Cl", "Br"];
const ORGANIC_ONE: [u8; 8] = [b'B', b'C', b'N', b'O', b'P', b'S', b'F', b'I'];
const AROMATIC_ONE: [u8; 6] = [b'b', b'c', b'n', b'o', b'p', b's'];

/// The 118 IUPAC element symbols.
const ELEMENTS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn",
    "Nh", "Fl", "Mc", "Lv", "Ts", "Og",
];

/// Aromatic forms allowed inside brackets.
const AROMATIC_BRACKET: [&str; 8] = ["b", "c", "n", "o", "p", "s", "se", "as"];

/// Lint a single SMILES string. All failures are reported as issues; the
/// string is valid iff none were found.
pub fn lint(smiles: &str) -> LintReport {
    let mut issues = Vec::new();
    let bytes = smiles.as_bytes();
    if bytes.is_empty() {
        issues.push(LintIssue {
            position: 0,
            kind: IssueKind::Empty,
            detail: "empty molecule string".to_string(),
        });
        return LintReport::from_issues(issues);
    }

    if BONDS.contains(&bytes[0]) {
        issues.push(LintIssue {
            position: 0,
            kind: IssueKind::BondAtBoundary,
            detail: format!("bond symbol {:?} at start", bytes[0] as char),
        });
    }
    let last = bytes.len() - 1;
    if BONDS.contains(&bytes[last]) {
        issues.push(LintIssue {
            position: last,
            kind: IssueKind::BondAtBoundary,
            detail: format!("bond symbol {:?} at end", bytes[last] as char),
        });
    }

    let mut paren_stack: Vec<usize> = Vec::new();
    // Ring label -> position where it was opened.
    let mut open_rings: Vec<(u32, usize)> = Vec::new();
    let mut toggle_ring = |label: u32, pos: usize| {
        if let Some(i) = open_rings.iter().position(|&(l, _)| l == label) {
            open_rings.swap_remove(i);
        } else {
            open_rings.push((label, pos));
        }
    };

    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b'(' => {
                paren_stack.push(i);
                i += 1;
            }
            b')' => {
                if paren_stack.pop().is_none() {
                    issues.push(LintIssue {
                        position: i,
                        kind: IssueKind::UnbalancedParen,
                        detail: "`)` without matching `(`".to_string(),
                    });
                }
                i += 1;
            }
            b'[' => {
                i = lint_bracket_atom(bytes, i, &mut issues);
            }
            b']' => {
                issues.push(LintIssue {
                    position: i,
                    kind: IssueKind::UnbalancedBracket,
                    detail: "`]` without matching `[`".to_string(),
                });
                i += 1;
            }
            b'0'..=b'9' => {
                toggle_ring((b - b'0') as u32, i);
                i += 1;
            }
            b'%' => {
                if i + 2 < bytes.len()
                    && bytes[i + 1].is_ascii_digit()
                    && bytes[i + 2].is_ascii_digit()
                {
                    let label =
                        100 + ((bytes[i + 1] - b'0') as u32) * 10 + (bytes[i + 2] - b'0') as u32;
                    toggle_ring(label, i);
                    i += 3;
                } else {
                    issues.push(LintIssue {
                        position: i,
                        kind: IssueKind::BadRingLabel,
                        detail: "`%` must be followed by two digits".to_string(),
                    });
                    i += 1;
                }
            }
            _ if BONDS.contains(&b) => {
                i += 1;
            }
            _ => {
                let two = if i + 1 < bytes.len() {
                    &bytes[i..i + 2]
                } else {
                    &bytes[i..]
                };
                if ORGANIC_TWO.iter().any(|s| s.as_bytes() == two) {
                    i += 2;
                } else if ORGANIC_ONE.contains(&b) || AROMATIC_ONE.contains(&b) {
                    i += 1;
                } else {
                    issues.push(LintIssue {
                        position: i,
                        kind: IssueKind::InvalidChar,
                        detail: format!("{:?} is not allowed outside brackets", b as char),
                    });
                    i += 1;
                }
            }
        }
    }

    for pos in paren_stack {
        issues.push(LintIssue {
            position: pos,
            kind: IssueKind::UnbalancedParen,
            detail: "`(` never closed".to_string(),
        });
    }
    for (label, pos) in open_rings {
        let shown = if label >= 100 { label - 100 } else { label };
        issues.push(LintIssue {
            position: pos,
            kind: IssueKind::UnclosedRing,
            detail: format!("ring label {shown} opened but never closed"),
        });
    }

    issues.sort_by_key(|iss| iss.position);
    LintReport::from_issues(issues)
}

/// Validate one bracket atom starting at the `[` at `open`. Returns the index
/// just past the closing `]` (or past the point where scanning gave up).
fn lint_bracket_atom(bytes: &[u8], open: usize, issues: &mut Vec<LintIssue>) -> usize {
    let close = match bytes[open..].iter().position(|&b| b == b']') {
        Some(off) => open + off,
        None => {
            issues.push(LintIssue {
                position: open,
                kind: IssueKind::UnbalancedBracket,
                detail: "`[` never closed".to_string(),
            });
            return bytes.len();
        }
    };
    let body = &bytes[open + 1..close];
    let mut j = 0;

    // isotope
    while j < body.len() && body[j].is_ascii_digit() {
        j += 1;
    }

    // element symbol: longest match first
    let sym_len = if j + 1 < body.len()
        && is_element(std::str::from_utf8(&body[j..j + 2]).unwrap_or(""))
    {
        2
    } else if j < body.len() && is_element(std::str::from_utf8(&body[j..j + 1]).unwrap_or("")) {
        1
    } else {
        issues.push(LintIssue {
            position: open + 1 + j,
            kind: IssueKind::BadBracketAtom,
            detail: "bracket atom has no valid element symbol".to_string(),
        });
        return close + 1;
    };
    j += sym_len;

    // chirality
    while j < body.len() && body[j] == b'@' {
        j += 1;
    }
    // explicit hydrogens
    if j < body.len() && body[j] == b'H' {
        j += 1;
        while j < body.len() && body[j].is_ascii_digit() {
            j += 1;
        }
    }
    // charge: run of one sign, optionally followed by digits
    if j < body.len() && (body[j] == b'+' || body[j] == b'-') {
        let sign = body[j];
        while j < body.len() && body[j] == sign {
            j += 1;
        }
        while j < body.len() && body[j].is_ascii_digit() {
            j += 1;
        }
    }

    if j != body.len() {
        issues.push(LintIssue {
            position: open + 1 + j,
            kind: IssueKind::BadBracketAtom,
            detail: format!(
                "unexpected {:?} in bracket atom",
                body[j] as char
            ),
        });
    }
    close + 1
}

fn is_element(sym: &str) -> bool {
    ELEMENTS.contains(&sym) || AROMATIC_BRACKET.contains(&sym)
}

/// Lint every molecule in a route tree, in pre-order. The reported
/// `position` of each issue is the pre-order index of the failing node; the
/// original in-string position is carried in the detail text.
pub fn lint_route(root: &RouteNode) -> LintReport {
    let mut issues = Vec::new();
    for (node_idx, node) in root.iter_preorder().enumerate() {
        let report = lint(node.smiles());
        for iss in report.issues {
            issues.push(LintIssue {
                position: node_idx,
                kind: iss.kind,
                detail: format!(
                    "node {node_idx} ({:?}) at char {}: {}",
                    node.smiles(),
                    iss.position,
                    iss.detail
                ),
            });
        }
    }
    LintReport::from_issues(issues)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::route::RouteNode;

    fn kinds(s: &str) -> Vec<IssueKind> {
        lint(s).issues.into_iter().map(|i| i.kind).collect()
    }

    #[test]
    fn organic_chain_is_valid() {
        assert!(lint("CCO").valid);
        assert!(lint("CC(=O)O").valid);
        assert!(lint("c1ccccc1").valid);
        assert!(lint("C/C=C/Cl").valid);
        assert!(lint("BrCCBr").valid);
    }

    #[test]
    fn unclosed_ring_label() {
        let report = lint("C1CC");
        assert!(!report.valid);
        assert_eq!(report.issues[0].kind, IssueKind::UnclosedRing);
        assert_eq!(report.issues[0].position, 1);
    }

    #[test]
    fn ring_labels_may_be_reused_after_closing() {
        assert!(lint("C1CC1C1CC1").valid);
        assert!(lint("C%12CCCC%12").valid);
        assert!(!lint("C%12CC").valid);
    }

    #[test]
    fn unbalanced_parenthesis() {
        let report = lint("C(");
        assert!(!report.valid);
        assert_eq!(report.issues[0].position, 1);
        assert_eq!(report.issues[0].kind, IssueKind::UnbalancedParen);
        assert_eq!(kinds("CC)"), vec![IssueKind::UnbalancedParen]);
    }

    #[test]
    fn bracket_atoms() {
        assert!(lint("[Na+]").valid);
        assert!(lint("[13CH4]").valid);
        assert!(lint("[C@@H]").valid);
        assert!(lint("[nH]").valid);
        assert!(lint("[Fe+2]").valid);
        assert!(lint("[O-]").valid);
        assert_eq!(kinds("[Xx]"), vec![IssueKind::BadBracketAtom]);
        assert_eq!(kinds("[C!]"), vec![IssueKind::BadBracketAtom]);
        assert_eq!(kinds("[C"), vec![IssueKind::UnbalancedBracket]);
        assert_eq!(kinds("C]"), vec![IssueKind::UnbalancedBracket]);
    }

    #[test]
    fn bonds_at_boundaries() {
        assert_eq!(kinds("=CC"), vec![IssueKind::BondAtBoundary]);
        assert_eq!(kinds("CC="), vec![IssueKind::BondAtBoundary]);
        assert!(lint("C=C").valid);
    }

    #[test]
    fn invalid_characters() {
        assert_eq!(kinds("CxC"), vec![IssueKind::InvalidChar]);
        assert_eq!(kinds("C C"), vec![IssueKind::InvalidChar]);
        assert_eq!(kinds("C*"), vec![IssueKind::InvalidChar]);
        assert!(!lint("").valid);
    }

    #[test]
    fn lint_is_pure() {
        assert_eq!(lint("C1CC"), lint("C1CC"));
    }

    #[test]
    fn route_lint_reports_node_index() {
        let good = RouteNode::new(
            "CCO",
            vec![RouteNode::leaf("CC").unwrap(), RouteNode::leaf("O").unwrap()],
        )
        .unwrap();
        assert!(lint_route(&good).valid);

        let bad = RouteNode::new(
            "CCO",
            vec![
                RouteNode::leaf("CC").unwrap(),
                RouteNode::leaf("C1CC").unwrap(),
            ],
        )
        .unwrap();
        let report = lint_route(&bad);
        assert!(!report.valid);
        assert_eq!(report.issues[0].position, 2);
        assert!(report.issues[0].detail.contains("node 2"));
    }

    #[test]
    fn route_lint_is_conjunction_of_node_lints() {
        let t = RouteNode::new(
            "CC",
            vec![RouteNode::leaf("C(").unwrap(), RouteNode::leaf("O").unwrap()],
        )
        .unwrap();
        let all_valid = t.iter_preorder().all(|n| lint(n.smiles()).valid);
        assert_eq!(lint_route(&t).valid, all_valid);
        assert!(!lint_route(&t).valid);
    }
}
