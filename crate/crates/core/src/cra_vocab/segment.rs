use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::select::WordCodebook;

/// One element of a sign sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SignToken {
    /// Residual character token (character codebook id).
    Char(u32),
    /// Word token (index into the word codebook).
    Word(u32),
}

/// Greedy left-to-right longest match against the word compositions.
/// Positions no word covers pass through as character tokens.
pub fn segment(chars: &[u32], codebook: &WordCodebook) -> Vec<SignToken> {
    let lookup: HashMap<&[u32], u32> = codebook
        .tokens
        .iter()
        .map(|t| (t.chars.as_slice(), t.id))
        .collect();
    let max_len = codebook.tokens.iter().map(|t| t.chars.len()).max().unwrap_or(0);
    let mut out = Vec::with_capacity(chars.len());
    let mut pos = 0;
    while pos < chars.len() {
        let longest = (1..=max_len.min(chars.len() - pos))
            .rev()
            .find_map(|len| lookup.get(&chars[pos..pos + len]).map(|&id| (id, len)));
        match longest {
            Some((id, len)) => {
                out.push(SignToken::Word(id));
                pos += len;
            }
            None => {
                out.push(SignToken::Char(chars[pos]));
                pos += 1;
            }
        }
    }
    out
}

/// Flat ids: characters keep their id, word `w` becomes `n_chars + w`.
pub fn sign_token_ids(tokens: &[SignToken], n_chars: usize) -> Vec<u32> {
    tokens
        .iter()
        .map(|t| match *t {
            SignToken::Char(c) => c,
            SignToken::Word(w) => n_chars as u32 + w,
        })
        .collect()
}
