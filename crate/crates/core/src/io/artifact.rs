use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sampler::FitResult;

pub const FIT_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct FitArtifact {
    format_version: u32,
    #[serde(flatten)]
    fit: FitResult,
}

/// Writes a fit as gzip-compressed JSON. The output depends only on the fit
/// (the gzip header carries no timestamp), so equal fits give equal bytes.
pub fn write_fit(path: impl AsRef<Path>, fit: &FitResult) -> Result<()> {
    let artifact = FitArtifact {
        format_version: FIT_FORMAT_VERSION,
        fit: fit.clone(),
    };
    let json = serde_json::to_vec(&artifact)?;
    let file = std::fs::File::create(path)?;
    let mut gz = GzEncoder::new(file, Compression::default());
    gz.write_all(&json)?;
    gz.finish()?.sync_all()?;
    Ok(())
}

/// Reads a fit written by [`write_fit`]; plain (uncompressed) JSON is accepted too.
pub fn read_fit(path: impl AsRef<Path>) -> Result<FitResult> {
    let bytes = std::fs::read(path)?;
    let json = if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(bytes.as_slice()).read_to_end(&mut out)?;
        out
    } else {
        bytes
    };
    let artifact: FitArtifact = serde_json::from_slice(&json)?;
    Ok(artifact.fit)
}
