//! Binary netpbm codecs: PPM (`P6`, maxval 255) for images and PBM (`P4`) for
//! pixel-set masks, where a set bit means "member".

use super::{Image, ImagingError, PixelSet};

struct Header {
    width: usize,
    height: usize,
    maxval: Option<u32>,
    body_offset: usize,
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, ImagingError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImagingError::MalformedHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImagingError::MalformedHeader(format!("{what} out of range")))
    }
}

fn parse_header(bytes: &[u8], magic: &[u8; 2], with_maxval: bool) -> Result<Header, ImagingError> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(ImagingError::MalformedHeader(format!(
            "expected magic {:?}",
            String::from_utf8_lossy(magic)
        )));
    }
    let mut r = HeaderReader { bytes, pos: 2 };
    let width = r.number("width")? as usize;
    let height = r.number("height")? as usize;
    if width == 0 || height == 0 {
        return Err(ImagingError::MalformedHeader(format!(
            "dimensions must be positive, got {width}x{height}"
        )));
    }
    let maxval = if with_maxval { Some(r.number("maxval")?) } else { None };
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(r.pos) {
        Some(b) if b.is_ascii_whitespace() => r.pos += 1,
        _ => {
            return Err(ImagingError::MalformedHeader(
                "missing whitespace before raster".into(),
            ))
        }
    }
    Ok(Header {
        width,
        height,
        maxval,
        body_offset: r.pos,
    })
}

/// Decodes a binary PPM (`P6`) with maxval 255. `#` comments in the header are skipped.
pub fn decode_ppm(bytes: &[u8]) -> Result<Image, ImagingError> {
    let header = parse_header(bytes, b"P6", true)?;
    match header.maxval {
        Some(255) => {}
        Some(m) => return Err(ImagingError::UnsupportedMaxval(m)),
        None => unreachable!(),
    }
    let expected = header
        .width
        .checked_mul(header.height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| ImagingError::MalformedHeader("dimensions overflow".into()))?;
    let body = &bytes[header.body_offset..];
    if body.len() < expected {
        return Err(ImagingError::TruncatedBody {
            expected,
            found: body.len(),
        });
    }
    Image::from_rgb_bytes(header.width, header.height, &body[..expected])
}

pub fn encode_ppm(image: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.to_rgb_bytes());
    out
}

/// Encodes a pixel set as a bit-packed PBM (`P4`); rows are padded to whole bytes, MSB first.
pub fn encode_pbm(set: &PixelSet) -> Vec<u8> {
    let (w, h) = set.dims();
    let mut out = format!("P4\n{w} {h}\n").into_bytes();
    let row_bytes = w.div_ceil(8);
    for y in 0..h {
        let mut row = vec![0u8; row_bytes];
        for x in 0..w {
            if set.contains(x, y) {
                row[x / 8] |= 0x80 >> (x % 8);
            }
        }
        out.extend(row);
    }
    out
}

pub fn decode_pbm(bytes: &[u8]) -> Result<PixelSet, ImagingError> {
    let header = parse_header(bytes, b"P4", false)?;
    let (w, h) = (header.width, header.height);
    let row_bytes = w.div_ceil(8);
    let expected = row_bytes * h;
    let body = &bytes[header.body_offset..];
    if body.len() < expected {
        return Err(ImagingError::TruncatedBody {
            expected,
            found: body.len(),
        });
    }
    Ok(PixelSet::from_fn(w, h, |x, y| {
        body[y * row_bytes + x / 8] & (0x80 >> (x % 8)) != 0
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn smallest_ppm() {
        let mut bytes = b"P6\n1 1\n255\n".to_vec();
        bytes.extend([10, 20, 30]);
        let img = decode_ppm(&bytes).unwrap();
        assert_eq!(img.dims(), (1, 1));
        assert_eq!(img.pixel(0, 0), [10, 20, 30]);
    }

    #[test]
    fn row_major_order() {
        let mut bytes = b"P6\n2 1\n255\n".to_vec();
        bytes.extend([1, 2, 3, 4, 5, 6]);
        let img = decode_ppm(&bytes).unwrap();
        assert_eq!(img.pixel(0, 0), [1, 2, 3]);
        assert_eq!(img.pixel(1, 0), [4, 5, 6]);
    }

    #[test]
    fn comments_are_skipped() {
        let mut bytes = b"P6\n# made by hand\n2 # width\n1\n# maxval next\n255\n".to_vec();
        bytes.extend([1, 2, 3, 4, 5, 6]);
        assert_eq!(decode_ppm(&bytes).unwrap().pixel(1, 0), [4, 5, 6]);
    }

    #[test]
    fn truncated_body() {
        let mut bytes = b"P6\n2 2\n255\n".to_vec();
        bytes.extend([0; 9]);
        assert_eq!(
            decode_ppm(&bytes).unwrap_err(),
            ImagingError::TruncatedBody {
                expected: 12,
                found: 9
            }
        );
    }

    #[test]
    fn error_kinds_are_distinct() {
        assert!(matches!(decode_ppm(b"P5\n1 1\n255\n\0"), Err(ImagingError::MalformedHeader(_))));
        assert!(matches!(decode_ppm(b"P6\n1\n"), Err(ImagingError::MalformedHeader(_))));
        assert!(matches!(decode_ppm(b"P6\n0 1\n255\n"), Err(ImagingError::MalformedHeader(_))));
        assert!(matches!(
            decode_ppm(b"P6\n1 1\n65535\n\0\0\0\0\0\0"),
            Err(ImagingError::UnsupportedMaxval(65535))
        ));
    }

    #[test]
    fn canonical_encoding() {
        let img = Image::filled(1, 1, [7, 8, 9]);
        assert_eq!(encode_ppm(&img), b"P6\n1 1\n255\n\x07\x08\x09".to_vec());
        let img = Image::filled(2, 2, [0, 0, 0]);
        assert_eq!(encode_ppm(&img).len(), b"P6\n2 2\n255\n".len() + 12);
    }

    #[test]
    fn pbm_layout() {
        let mut s = PixelSet::empty(10, 2);
        s.insert(0, 0);
        s.insert(9, 0);
        s.insert(1, 1);
        let bytes = encode_pbm(&s);
        assert_eq!(&bytes[..8], b"P4\n10 2\n");
        assert_eq!(&bytes[8..], &[0b1000_0000, 0b0100_0000, 0b0100_0000, 0]);
        assert_eq!(decode_pbm(&bytes).unwrap(), s);
    }

    proptest! {
        #[test]
        fn ppm_round_trip(w in 1usize..12, h in 1usize..12, data in proptest::collection::vec(any::<u8>(), 432)) {
            let img = Image::from_rgb_bytes(w, h, &data[..w * h * 3]).unwrap();
            prop_assert_eq!(decode_ppm(&encode_ppm(&img)).unwrap(), img);
        }

        #[test]
        fn pbm_round_trip(w in 1usize..20, h in 1usize..20, bits in any::<u64>()) {
            let s = PixelSet::from_fn(w, h, |x, y| bits.rotate_left((x * 3 + y * 7) as u32) & 1 == 1);
            prop_assert_eq!(decode_pbm(&encode_pbm(&s)).unwrap(), s);
        }
    }
}
