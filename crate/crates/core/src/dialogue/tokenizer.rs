/// Byte-level tokenizer: token ids are UTF-8 bytes, with byte 0 doubling
/// as end-of-sequence (it never occurs in ordinary text).
#[derive(Debug, Clone, Copy, Default)]
pub struct ByteTokenizer;

impl ByteTokenizer {
    pub const VOCAB: usize = 256;
    pub const EOS: u32 = 0;

    pub fn encode(&self, text: &str) -> Vec<u32> {
        text.bytes().filter(|&b| b != 0).map(u32::from).collect()
    }

    pub fn decode(&self, ids: &[u32]) -> String {
        let bytes: Vec<u8> = ids.iter().take_while(|&&i| i != Self::EOS).map(|&i| i as u8).collect();
        String::from_utf8_lossy(&bytes).into_owned()
    }

    pub fn count(&self, text: &str) -> usize {
        text.bytes().filter(|&b| b != 0).count()
    }
}

/// Longest suffix of `text` that fits in `max_tokens`, cut on a char boundary.
pub fn keep_tail(text: &str, max_tokens: usize) -> &str {
    if text.len() <= max_tokens {
        return text;
    }
    let mut cut = text.len() - max_tokens;
    while !text.is_char_boundary(cut) {
        cut += 1;
    }
    &text[cut..]
}
