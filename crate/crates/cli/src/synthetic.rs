//! `--synthetic` specs: in-process classifiers for demos and tests.
//!
//! ```text
//! constant:LABEL
//! green-count:THRESHOLD
//! patch-or:X0,Y0,X1,Y1[;X0,Y0,X1,Y1...]
//! patch-threshold:K;X0,Y0,X1,Y1[;...]
//! ```
//!
//! Patch corners are inclusive pixel coordinates. Patch classifiers compare
//! against the input image, so the unmasked input is always labelled 1.

use anyhow::{bail, ensure, Context, Result};
use explain_core::classifier::synthetic::{self, PatchThreshold, GREEN};
use explain_core::{ClassifierHandle, Image, PixelSet};

fn parse_rect(s: &str, image: &Image) -> Result<PixelSet> {
    let v: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().with_context(|| format!("bad coordinate {t:?} in patch {s:?}")))
        .collect::<Result<_>>()?;
    let [x0, y0, x1, y1] = v[..] else {
        bail!("patch {s:?} must be X0,Y0,X1,Y1");
    };
    let (w, h) = image.dims();
    ensure!(x0 <= x1 && y0 <= y1, "patch {s:?} has its corners swapped");
    ensure!(x1 < w && y1 < h, "patch {s:?} leaves the {w}x{h} image");
    Ok(PixelSet::rect(w, h, x0, y0, x1, y1))
}

fn parse_rects(s: &str, image: &Image) -> Result<Vec<PixelSet>> {
    let rects = s
        .split(';')
        .filter(|t| !t.trim().is_empty())
        .map(|t| parse_rect(t, image))
        .collect::<Result<Vec<_>>>()?;
    ensure!(!rects.is_empty(), "at least one patch is required");
    Ok(rects)
}

pub fn build(spec: &str, image: &Image) -> Result<ClassifierHandle> {
    let (name, args) = spec.split_once(':').unwrap_or((spec, ""));
    Ok(match name {
        "constant" => {
            let label = args.trim().parse().with_context(|| format!("constant needs an integer label, got {args:?}"))?;
            synthetic::constant(label)
        }
        "green-count" => {
            let t = args.trim().parse().with_context(|| format!("green-count needs a threshold, got {args:?}"))?;
            synthetic::green_count(t, GREEN)
        }
        "patch-or" => synthetic::patch_or(parse_rects(args, image)?, image.clone())?,
        "patch-threshold" => {
            let (k, rest) = args.split_once(';').context("patch-threshold needs K;patches")?;
            let k = k.trim().parse().with_context(|| format!("bad threshold {k:?}"))?;
            ClassifierHandle::new(PatchThreshold::new(parse_rects(rest, image)?, image.clone(), k)?)
        }
        other => bail!("unknown synthetic classifier {other:?} (constant, green-count, patch-or, patch-threshold)"),
    })
}
