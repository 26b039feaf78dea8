//! Character-level tokenizer with keyword tokens and special tokens.
//!
//! Route strings tokenize one character at a time except for the grammar
//! keywords `smiles` and `children`, which are single tokens. Encoder inputs
//! are assembled as target ⊕ `,` ⊕ starting material ⊕ `,` ⊕ decimal step
//! count; decoder targets are route strings wrapped in BOS/EOS.

use std::collections::HashMap;

pub const BOS_TOKEN: &str = "<bos>";
pub const EOS_TOKEN: &str = "<eos>";
pub const PAD_TOKEN: &str = "<pad>";
pub const KEYWORD_TOKENS: [&str; 2] = ["smiles", "children"];

const VOCAB_FILE_HEADER: &str = "retroroute-vocab 1";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VocabError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("no vocabulary token matches input at byte {0}")]
    UnknownToken(usize),
    #[error("token id {0} is out of range")]
    InvalidId(u32),
    #[error("step count {0} outside 1..=99")]
    StepsOutOfRange(i64),
    #[error("sequence of length {len} exceeds maximum {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("bad vocabulary file: {0}")]
    BadFile(String),
}

/// What a token sequence feeds: the encoder or the decoder target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqKind {
    EncoderInput,
    RouteTarget,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSeq {
    pub ids: Vec<u32>,
    pub kind: SeqKind,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Bidirectional token table. Ids are contiguous from 0 with the special
/// tokens first, then the grammar keywords, then single characters in byte
/// order, so the table is a pure function of the corpus content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    /// Multi-character tokens, longest first, for greedy matching.
    multi: Vec<String>,
}

impl Vocab {
    pub const BOS: u32 = 0;
    pub const EOS: u32 = 1;
    pub const PAD: u32 = 2;

    /// Build the table from every string in the corpus (route strings and
    /// molecule strings alike). Keyword occurrences are consumed whole, so
    /// their interior letters do not leak into the character set.
    pub fn build<I>(corpus: I) -> Result<Self, VocabError>
    where
        I: IntoIterator,
        I::Item: AsRef<str>,
    {
        let mut chars: Vec<char> = Vec::new();
        let mut any = false;
        for item in corpus {
            any = true;
            let text = item.as_ref();
            let bytes = text.as_bytes();
            let mut i = 0;
            'scan: while i < bytes.len() {
                for kw in KEYWORD_TOKENS {
                    if bytes[i..].starts_with(kw.as_bytes()) {
                        i += kw.len();
                        continue 'scan;
                    }
                }
                let c = text[i..].chars().next().expect("in-bounds char");
                if !chars.contains(&c) {
                    chars.push(c);
                }
                i += c.len_utf8();
            }
        }
        if !any {
            return Err(VocabError::EmptyCorpus);
        }
        chars.sort_unstable();

        let mut tokens: Vec<String> = vec![
            BOS_TOKEN.to_string(),
            EOS_TOKEN.to_string(),
            PAD_TOKEN.to_string(),
        ];
        tokens.extend(KEYWORD_TOKENS.iter().map(|s| s.to_string()));
        tokens.extend(chars.into_iter().map(String::from));
        Self::from_tokens(tokens)
    }

    fn from_tokens(tokens: Vec<String>) -> Result<Self, VocabError> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(VocabError::BadFile(format!("duplicate token {t:?}")));
            }
        }
        for (name, id) in [(BOS_TOKEN, Self::BOS), (EOS_TOKEN, Self::EOS), (PAD_TOKEN, Self::PAD)]
        {
            if tokens.get(id as usize).map(String::as_str) != Some(name) {
                return Err(VocabError::BadFile(format!(
                    "special token {name} missing at id {id}"
                )));
            }
        }
        let mut multi: Vec<String> = tokens
            .iter()
            .filter(|t| t.chars().count() > 1 && !t.starts_with('<'))
            .cloned()
            .collect();
        multi.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        Ok(Vocab {
            tokens,
            index,
            multi,
        })
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn token(&self, id: u32) -> Result<&str, VocabError> {
        self.tokens
            .get(id as usize)
            .map(String::as_str)
            .ok_or(VocabError::InvalidId(id))
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Greedy longest-match tokenization of raw text (no specials added).
    pub fn tokenize(&self, text: &str) -> Result<Vec<u32>, VocabError> {
        let bytes = text.as_bytes();
        let mut ids = Vec::with_capacity(bytes.len());
        let mut i = 0;
        'scan: while i < bytes.len() {
            for tok in &self.multi {
                if bytes[i..].starts_with(tok.as_bytes()) {
                    ids.push(self.index[tok]);
                    i += tok.len();
                    continue 'scan;
                }
            }
            let c = text[i..].chars().next().ok_or(VocabError::UnknownToken(i))?;
            let mut buf = [0u8; 4];
            match self.index.get(c.encode_utf8(&mut buf) as &str) {
                Some(&id) => ids.push(id),
                None => return Err(VocabError::UnknownToken(i)),
            }
            i += c.len_utf8();
        }
        Ok(ids)
    }

    /// Token ids back to text, skipping BOS/EOS/PAD.
    pub fn decode(&self, ids: &[u32]) -> Result<String, VocabError> {
        let mut out = String::new();
        for &id in ids {
            if id == Self::BOS || id == Self::EOS || id == Self::PAD {
                continue;
            }
            out.push_str(self.token(id)?);
        }
        Ok(out)
    }

    /// Line-oriented text form: header with format version, then one escaped
    /// token per line in id order.
    pub fn to_file_string(&self) -> String {
        let mut out = String::from(VOCAB_FILE_HEADER);
        out.push('\n');
        for t in &self.tokens {
            out.push_str(&escape_token(t));
            out.push('\n');
        }
        out
    }

    pub fn from_file_string(text: &str) -> Result<Self, VocabError> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == VOCAB_FILE_HEADER => {}
            Some(h) => {
                return Err(VocabError::BadFile(format!(
                    "unsupported header {h:?}, expected {VOCAB_FILE_HEADER:?}"
                )))
            }
            None => return Err(VocabError::BadFile("empty file".to_string())),
        }
        let tokens = lines.map(unescape_token).collect::<Result<Vec<_>, _>>()?;
        Self::from_tokens(tokens)
    }

    /// 64-bit FNV-1a over the serialized file bytes; stored in checkpoints to
    /// detect tokenizer drift.
    pub fn fingerprint(&self) -> u64 {
        fnv1a64(self.to_file_string().as_bytes())
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn escape_token(t: &str) -> String {
    let mut out = String::with_capacity(t.len());
    for c in t.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            ' ' => out.push_str("\\s"),
            _ => out.push(c),
        }
    }
    out
}

fn unescape_token(line: &str) -> Result<String, VocabError> {
    let mut out = String::with_capacity(line.len());
    let mut chars = line.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('t') => out.push('\t'),
            Some('s') => out.push(' '),
            other => {
                return Err(VocabError::BadFile(format!(
                    "bad escape \\{} in token line",
                    other.map(String::from).unwrap_or_default()
                )))
            }
        }
    }
    Ok(out)
}

/// Tokenize a route string for the decoder: BOS ⊕ tokens ⊕ EOS.
pub fn encode_route(text: &str, vocab: &Vocab) -> Result<TokenSeq, VocabError> {
    let mut ids = vec![Vocab::BOS];
    ids.extend(vocab.tokenize(text)?);
    ids.push(Vocab::EOS);
    Ok(TokenSeq {
        ids,
        kind: SeqKind::RouteTarget,
    })
}

/// Assemble the conditioning sequence for the encoder: tokenized target,
/// a `,` separator, the tokenized starting material (empty when absent), a
/// second `,`, then the decimal digits of the step count.
pub fn encode_encoder_input(
    target: &str,
    sm: Option<&str>,
    steps: usize,
    vocab: &Vocab,
) -> Result<TokenSeq, VocabError> {
    if !(1..=99).contains(&steps) {
        return Err(VocabError::StepsOutOfRange(steps as i64));
    }
    let sep = vocab
        .id(",")
        .ok_or_else(|| VocabError::BadFile("`,` token missing from vocabulary".to_string()))?;
    let mut ids = vocab.tokenize(target)?;
    ids.push(sep);
    if let Some(sm) = sm {
        ids.extend(vocab.tokenize(sm)?);
    }
    ids.push(sep);
    ids.extend(vocab.tokenize(&steps.to_string())?);
    Ok(TokenSeq {
        ids,
        kind: SeqKind::EncoderInput,
    })
}

/// Right-padded id matrix plus a mask marking real tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedBatch {
    pub rows: usize,
    pub cols: usize,
    /// Row-major, rows × cols.
    pub ids: Vec<u32>,
    /// Row-major; true at real-token positions.
    pub mask: Vec<bool>,
}

pub fn pad_batch(seqs: &[TokenSeq], max_len: usize) -> Result<PaddedBatch, VocabError> {
    let rows = seqs.len();
    let mut ids = vec![Vocab::PAD; rows * max_len];
    let mut mask = vec![false; rows * max_len];
    for (r, seq) in seqs.iter().enumerate() {
        if seq.ids.len() > max_len {
            return Err(VocabError::SequenceTooLong {
                len: seq.ids.len(),
                max: max_len,
            });
        }
        for (c, &id) in seq.ids.iter().enumerate() {
            ids[r * max_len + c] = id;
            mask[r * max_len + c] = true;
        }
    }
    Ok(PaddedBatch {
        rows,
        cols: max_len,
        ids,
        mask,
    })
}
