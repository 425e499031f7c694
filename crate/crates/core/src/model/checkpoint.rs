//! Model checkpoint file: `DAMP` magic, u32 version, one mode byte, a shape
//! table (u32 tensor count, then u32 rows / u32 cols per tensor), followed by
//! each tensor's entries as little-endian f64 in row-major order, in
//! [`ModelParams`] field order (token, char, position, path, combine,
//! attention, label output). The attention vector is stored as a 1×h tensor.

use super::{Mat, ModelParams};
use crate::pathctx::{NameMode, Vocabulary, NAME_LEN, N_CHARS};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"DAMP";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a model checkpoint: {0}")]
    Format(String),
    #[error("checkpoint shape mismatch: {0}")]
    ShapeMismatch(String),
}

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<(), CheckpointError> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(match params.mode {
        NameMode::Token => 0,
        NameMode::Char => 1,
    });
    let tensors: Vec<(usize, usize, &[f64])> = tensor_table(params);
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (rows, cols, _) in &tensors {
        out.extend_from_slice(&(*rows as u32).to_le_bytes());
        out.extend_from_slice(&(*cols as u32).to_le_bytes());
    }
    for (_, _, data) in &tensors {
        for v in *data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

fn tensor_table(params: &ModelParams) -> Vec<(usize, usize, &[f64])> {
    vec![
        (
            params.token_embed.rows(),
            params.token_embed.cols(),
            params.token_embed.data(),
        ),
        (
            params.char_embed.rows(),
            params.char_embed.cols(),
            params.char_embed.data(),
        ),
        (
            params.pos_embed.rows(),
            params.pos_embed.cols(),
            params.pos_embed.data(),
        ),
        (
            params.path_embed.rows(),
            params.path_embed.cols(),
            params.path_embed.data(),
        ),
        (
            params.combine.rows(),
            params.combine.cols(),
            params.combine.data(),
        ),
        (1, params.attention.len(), &params.attention),
        (
            params.label_out.rows(),
            params.label_out.cols(),
            params.label_out.data(),
        ),
    ]
}

/// Loads a checkpoint and validates every tensor shape against the
/// vocabulary and against the internal dimension consistency rules.
pub fn load_checkpoint(path: &Path, vocab: &Vocabulary) -> Result<ModelParams, CheckpointError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut cursor = 0usize;

    let take = |cursor: &mut usize, n: usize| -> Result<&[u8], CheckpointError> {
        if *cursor + n > bytes.len() {
            return Err(CheckpointError::Format("truncated checkpoint".into()));
        }
        let s = &bytes[*cursor..*cursor + n];
        *cursor += n;
        Ok(s)
    };

    if take(&mut cursor, 4)? != MAGIC {
        return Err(CheckpointError::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap());
    if version != VERSION {
        return Err(CheckpointError::Format(format!(
            "unsupported version {version}"
        )));
    }
    let mode = match take(&mut cursor, 1)?[0] {
        0 => NameMode::Token,
        1 => NameMode::Char,
        m => return Err(CheckpointError::Format(format!("unknown mode byte {m}"))),
    };
    let count = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
    if count != 7 {
        return Err(CheckpointError::Format(format!(
            "expected 7 tensors, found {count}"
        )));
    }
    let mut shapes = Vec::with_capacity(count);
    for _ in 0..count {
        let rows = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
        shapes.push((rows, cols));
    }
    let mut tensors = Vec::with_capacity(count);
    for &(rows, cols) in &shapes {
        let n = rows * cols;
        let raw = take(&mut cursor, n * 8)?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push(Mat::from_vec(rows, cols, data));
    }
    if cursor != bytes.len() {
        return Err(CheckpointError::Format("trailing bytes".into()));
    }

    let d = tensors[0].cols();
    let h = tensors[5].cols();
    let checks = [
        (tensors[0].rows() == vocab.n_tokens(), "token table rows"),
        (tensors[1].rows() == N_CHARS, "char table rows"),
        (tensors[2].rows() == NAME_LEN, "position table rows"),
        (tensors[3].rows() == vocab.n_paths(), "path table rows"),
        (tensors[6].rows() == vocab.n_labels(), "label table rows"),
        (tensors[1].cols() == d, "char embedding width"),
        (tensors[2].cols() == d, "position embedding width"),
        (tensors[3].cols() == d, "path embedding width"),
        (tensors[4].rows() == 3 * d, "combine matrix rows"),
        (tensors[4].cols() == h, "combine matrix cols"),
        (tensors[5].rows() == 1, "attention vector rows"),
        (tensors[6].cols() == h, "label matrix cols"),
    ];
    for (ok, what) in checks {
        if !ok {
            return Err(CheckpointError::ShapeMismatch(what.to_string()));
        }
    }

    let mut it = tensors.into_iter();
    let token_embed = it.next().unwrap();
    let char_embed = it.next().unwrap();
    let pos_embed = it.next().unwrap();
    let path_embed = it.next().unwrap();
    let combine = it.next().unwrap();
    let attention = it.next().unwrap().data().to_vec();
    let label_out = it.next().unwrap();
    Ok(ModelParams {
        mode,
        token_embed,
        char_embed,
        pos_embed,
        path_embed,
        combine,
        attention,
        label_out,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{init_params, HyperParams};
    use super::*;

    fn tiny_vocab() -> Vocabulary {
        Vocabulary::from_tables(
            vec!["x".into(), "y".into()],
            vec!["p".into()],
            vec!["f".into()],
        )
    }

    #[test]
    fn roundtrip_preserves_every_bit() {
        let vocab = tiny_vocab();
        let params = init_params(&vocab, 99, NameMode::Char, HyperParams::default());
        let dir = std::env::temp_dir().join("damp-ckpt-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.damp");
        save_checkpoint(&params, &path).unwrap();
        let loaded = load_checkpoint(&path, &vocab).unwrap();
        assert_eq!(params, loaded);
    }

    #[test]
    fn wrong_vocabulary_is_rejected() {
        let vocab = tiny_vocab();
        let params = init_params(&vocab, 1, NameMode::Token, HyperParams::default());
        let dir = std::env::temp_dir().join("damp-ckpt-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model2.damp");
        save_checkpoint(&params, &path).unwrap();
        let bigger = Vocabulary::from_tables(
            vec!["x".into(), "y".into(), "z".into()],
            vec!["p".into()],
            vec!["f".into()],
        );
        assert!(matches!(
            load_checkpoint(&path, &bigger),
            Err(CheckpointError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn garbage_is_rejected() {
        let dir = std::env::temp_dir().join("damp-ckpt-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("garbage.damp");
        std::fs::write(&path, b"not a checkpoint").unwrap();
        assert!(matches!(
            load_checkpoint(&path, &tiny_vocab()),
            Err(CheckpointError::Format(_))
        ));
    }
}
