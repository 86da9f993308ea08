//! Lossless codecs for the top-level RKV planes.

use std::io::Cursor;

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ImageEncoder, ImageFormat};
use serde::{Deserialize, Serialize};

use crate::lfcore::{Plane, ValueRange};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RkvCodec {
    /// Grayscale PNG of `v - range.min`, 8-bit when the range fits, else 16-bit.
    #[default]
    Png,
    /// Little-endian i16 samples.
    Raw,
}

impl RkvCodec {
    pub fn id(self) -> u8 {
        match self {
            RkvCodec::Png => 0,
            RkvCodec::Raw => 1,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(RkvCodec::Png),
            1 => Some(RkvCodec::Raw),
            _ => None,
        }
    }
}

pub fn encode_rkv(codec: RkvCodec, plane: &Plane) -> Result<Vec<u8>, String> {
    let range = plane.range();
    match codec {
        RkvCodec::Raw => Ok(plane.samples().iter().flat_map(|&v| (v as i16).to_le_bytes()).collect()),
        RkvCodec::Png => {
            let (w, h) = (plane.width() as u32, plane.height() as u32);
            let mut out = Vec::new();
            let enc = PngEncoder::new_with_quality(&mut out, CompressionType::Best, FilterType::Adaptive);
            if range.width() <= 255 {
                let buf: Vec<u8> = plane.samples().iter().map(|&v| (v - range.min) as u8).collect();
                enc.write_image(&buf, w, h, image::ExtendedColorType::L8).map_err(|e| e.to_string())?;
            } else {
                // The encoder takes 16-bit samples in native byte order.
                let buf: Vec<u8> =
                    plane.samples().iter().flat_map(|&v| ((v - range.min) as u16).to_ne_bytes()).collect();
                enc.write_image(&buf, w, h, image::ExtendedColorType::L16).map_err(|e| e.to_string())?;
            }
            Ok(out)
        }
    }
}

pub fn decode_rkv(
    codec: RkvCodec,
    bytes: &[u8],
    width: usize,
    height: usize,
    range: ValueRange,
) -> Result<Plane, String> {
    let samples: Vec<i32> = match codec {
        RkvCodec::Raw => {
            if bytes.len() != width * height * 2 {
                return Err(format!("raw rkv has {} bytes, expected {}", bytes.len(), width * height * 2));
            }
            bytes.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]]) as i32).collect()
        }
        RkvCodec::Png => {
            let img = image::load(Cursor::new(bytes), ImageFormat::Png).map_err(|e| e.to_string())?;
            if (img.width() as usize, img.height() as usize) != (width, height) {
                return Err(format!("rkv image is {}x{}, expected {width}x{height}", img.width(), img.height()));
            }
            match img {
                image::DynamicImage::ImageLuma8(g) => g.into_raw().into_iter().map(|v| v as i32 + range.min).collect(),
                image::DynamicImage::ImageLuma16(g) => {
                    g.into_raw().into_iter().map(|v| v as i32 + range.min).collect()
                }
                other => return Err(format!("unexpected rkv pixel type {:?}", other.color())),
            }
        }
    };
    Plane::new(width, height, samples, range).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn both_codecs_round_trip_both_depths() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for range in [ValueRange::U8, ValueRange::new(-255, 255)] {
            let p = Plane::from_fn(17, 11, range, |_, _| rng.gen_range(range.min..=range.max)).unwrap();
            for codec in [RkvCodec::Png, RkvCodec::Raw] {
                let bytes = encode_rkv(codec, &p).unwrap();
                assert_eq!(decode_rkv(codec, &bytes, 17, 11, range).unwrap(), p);
                assert_eq!(RkvCodec::from_id(codec.id()), Some(codec));
            }
        }
    }

    #[test]
    fn wrong_dimensions_are_rejected() {
        let p = Plane::filled(4, 4, 7, ValueRange::U8);
        let bytes = encode_rkv(RkvCodec::Png, &p).unwrap();
        assert!(decode_rkv(RkvCodec::Png, &bytes, 4, 5, ValueRange::U8).is_err());
        assert!(decode_rkv(RkvCodec::Raw, &[0; 3], 4, 4, ValueRange::U8).is_err());
    }
}
