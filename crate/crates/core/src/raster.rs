//! 8-bit gray/RGB rasters and their PNG / PGM / PPM encodings.
//!
//! Pixel `(x, y)` has its center at integer coordinates `(x, y)`; the raster
//! covers `[-0.5, width - 0.5] x [-0.5, height - 0.5]`.

use std::path::Path;

use image::{ExtendedColorType, ImageReader};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq)]
pub struct Raster {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl std::fmt::Debug for Raster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Raster")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .finish_non_exhaustive()
    }
}

impl Raster {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRaster(format!("dimensions {width}x{height} must be at least 1x1")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidRaster(format!("{channels} channels; expected 1 or 3")));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(Error::InvalidRaster(format!(
                "data length {} does not match {width}x{height}x{channels} = {expected}",
                data.len()
            )));
        }
        Ok(Raster { width, height, channels, data })
    }

    pub fn filled(width: u32, height: u32, channels: u8, value: u8) -> Result<Self> {
        let len = width as usize * height as usize * channels as usize;
        Raster::new(width, height, channels, vec![value; len])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn row_len(&self) -> usize {
        self.width as usize * self.channels as usize
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let c = self.channels as usize;
        let i = (y as usize * self.width as usize + x as usize) * c;
        &self.data[i..i + c]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: u32, y: u32) -> &mut [u8] {
        let c = self.channels as usize;
        let i = (y as usize * self.width as usize + x as usize) * c;
        &mut self.data[i..i + c]
    }

    /// Reads PNG, PGM or PPM. Gray inputs stay single-channel; everything else
    /// is converted to RGB.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let decode = |source| Error::ImageDecode { path: path.to_path_buf(), source };
        let img = ImageReader::open(path)
            .map_err(|e| Error::io(path, e))?
            .with_guessed_format()
            .map_err(|e| Error::io(path, e))?
            .decode()
            .map_err(decode)?;
        let (w, h) = (img.width(), img.height());
        let raster = if img.color().has_color() {
            Raster::new(w, h, 3, img.into_rgb8().into_raw())
        } else {
            Raster::new(w, h, 1, img.into_luma8().into_raw())
        };
        raster.map_err(|e| Error::ImageDecode {
            path: path.to_path_buf(),
            source: image::ImageError::IoError(std::io::Error::other(e.to_string())),
        })
    }

    /// Writes the raster; the format follows the extension (`png`, `pgm`,
    /// `ppm`).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let color = match self.channels {
            1 => ExtendedColorType::L8,
            _ => ExtendedColorType::Rgb8,
        };
        image::save_buffer(path, &self.data, self.width, self.height, color)
            .map_err(|source| Error::ImageEncode { path: path.to_path_buf(), source })
    }
}
