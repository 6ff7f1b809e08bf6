//! RGB rasters, pixel sets and masking.
//!
//! Masking is the only intervention the causal model permits: pixels outside a
//! kept set are replaced by a fixed [`MaskingColour`].

mod pixelset;
pub mod pnm;

use std::fmt;
use std::str::FromStr;

pub use pixelset::PixelSet;

/// One RGB8 pixel.
pub type Rgb = [u8; 3];

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ImagingError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated body: expected {expected} bytes, found {found}")]
    TruncatedBody { expected: usize, found: usize },
    #[error("unsupported maxval {0} (only 255 is accepted)")]
    UnsupportedMaxval(u32),
    #[error("dimension mismatch: image is {image:?}, mask is {mask:?}")]
    DimensionMismatch {
        image: (usize, usize),
        mask: (usize, usize),
    },
    #[error("invalid image: {0}")]
    InvalidImage(String),
}

/// Fixed-size RGB raster stored row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<Rgb>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<Rgb>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(ImagingError::InvalidImage(format!(
                "{} pixels supplied for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Uniformly coloured image.
    pub fn filled(width: usize, height: usize, colour: Rgb) -> Self {
        Self::new(width, height, vec![colour; width * height]).expect("positive dimensions")
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Rgb) -> Self {
        let pixels = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::new(width, height, pixels).expect("positive dimensions")
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    /// Raw row-major RGB8 bytes.
    pub fn to_rgb_bytes(&self) -> Vec<u8> {
        self.pixels.iter().flatten().copied().collect()
    }

    pub fn from_rgb_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self, ImagingError> {
        if bytes.len() != width * height * 3 {
            return Err(ImagingError::InvalidImage(format!(
                "{} bytes supplied for a {width}x{height} RGB image",
                bytes.len()
            )));
        }
        let pixels = bytes.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Self::new(width, height, pixels)
    }

    /// A pixel set covering the whole image.
    pub fn all_pixels(&self) -> PixelSet {
        PixelSet::full(self.width, self.height)
    }
}

impl fmt::Debug for Image {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Image({}x{})", self.width, self.height)
    }
}

/// The reference colour substituted for removed pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct MaskingColour(pub Rgb);

impl MaskingColour {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self([r, g, b])
    }
}

impl Default for MaskingColour {
    fn default() -> Self {
        Self([234, 234, 234])
    }
}

impl fmt::Display for MaskingColour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [r, g, b] = self.0;
        write!(f, "{r},{g},{b}")
    }
}

impl FromStr for MaskingColour {
    type Err = String;

    /// Parses `R,G,B` with each channel in `0..=255`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(format!("expected R,G,B but got {s:?}"));
        }
        let mut rgb = [0u8; 3];
        for (slot, part) in rgb.iter_mut().zip(&parts) {
            *slot = part
                .parse::<u8>()
                .map_err(|_| format!("channel {part:?} is not an integer in 0..=255"))?;
        }
        Ok(Self(rgb))
    }
}

/// Keeps the pixels of `keep` and replaces every other pixel by `colour`.
pub fn apply_mask(image: &Image, keep: &PixelSet, colour: MaskingColour) -> Result<Image, ImagingError> {
    if keep.dims() != image.dims() {
        return Err(ImagingError::DimensionMismatch {
            image: image.dims(),
            mask: keep.dims(),
        });
    }
    let pixels = image
        .pixels
        .iter()
        .enumerate()
        .map(|(i, &p)| if keep.contains_index(i) { p } else { colour.0 })
        .collect();
    Ok(Image {
        width: image.width,
        height: image.height,
        pixels,
    })
}
