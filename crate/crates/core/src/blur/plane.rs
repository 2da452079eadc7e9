use super::{BlurError, KernelMatrix};
use crate::scalar::Real;

/// 8-bit image with 1 (gray) or 3 (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl ImagePlane {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        pixels: Vec<u8>,
    ) -> Result<Self, BlurError> {
        if width == 0 || height == 0 {
            return Err(BlurError::InvalidImage("width and height must be > 0".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(BlurError::InvalidImage(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if pixels.len() != width * height * channels {
            return Err(BlurError::InvalidImage(format!(
                "expected {} samples, got {}",
                width * height * channels,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self, BlurError> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Interleaved samples, row-major.
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    pub fn set(&mut self, x: usize, y: usize, c: usize, v: u8) {
        self.pixels[(y * self.width + x) * self.channels + c] = v;
    }

    /// Copy of one channel as a row-major grid.
    pub fn channel(&self, c: usize) -> Vec<u8> {
        assert!(c < self.channels, "channel index out of range");
        self.pixels
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect()
    }

    pub fn mirrored_horizontally(&self) -> Self {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                for c in 0..self.channels {
                    out.set(self.width - 1 - x, y, c, self.get(x, y, c));
                }
            }
        }
        out
    }
}

/// Mirror index with the edge sample repeated: `-1 -> 0`, `n -> n - 1`.
/// Valid while the overshoot is at most `n`.
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let j = if i < 0 {
        -i - 1
    } else if i >= n {
        2 * n - i - 1
    } else {
        i
    };
    debug_assert!((0..n).contains(&j));
    j as usize
}

#[inline]
fn quantize<T: Real>(v: T) -> u8 {
    let r = (v + T::lit(0.5)).floor();
    r.max(T::zero()).min(T::lit(255.0)).to_u8().unwrap_or(0)
}

fn check_fits<T: Real>(img: &ImagePlane, k: &KernelMatrix<T>) -> Result<(), BlurError> {
    if k.radius() > img.width.min(img.height) {
        return Err(BlurError::KernelTooLarge {
            size: k.size(),
            width: img.width,
            height: img.height,
        });
    }
    Ok(())
}

/// Direct 2-D convolution of one channel, unrounded.
pub fn blur_channel_real<T: Real>(
    img: &ImagePlane,
    channel: usize,
    k: &KernelMatrix<T>,
) -> Result<Vec<T>, BlurError> {
    check_fits(img, k)?;
    let src = img.channel(channel);
    let (w, h) = (img.width, img.height);
    let r = k.radius() as isize;
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = T::zero();
            for dy in -r..=r {
                let row = reflect(y + dy, h) * w;
                for dx in -r..=r {
                    let a = src[row + reflect(x + dx, w)];
                    acc += T::from_u8(a).unwrap() * k.weight(dx, dy);
                }
            }
            out.push(acc);
        }
    }
    Ok(out)
}

/// One 1-D pass over `len` samples spaced `stride` apart. Mirrored taps are
/// added before weighting so the result is independent of scan direction.
#[inline]
fn convolve_line<T: Real>(factor: &[T], radius: usize, len: usize, at: impl Fn(usize) -> T, out: &mut [T]) {
    let r = radius as isize;
    for (i, o) in out.iter_mut().enumerate().take(len) {
        let i = i as isize;
        let mut acc = factor[radius] * at(i as usize);
        for d in 1..=r {
            let pair = at(reflect(i - d, len)) + at(reflect(i + d, len));
            acc += factor[radius + d as usize] * pair;
        }
        *o = acc;
    }
}

/// Separable convolution of one channel (rows, then columns), unrounded.
pub fn blur_channel_real_separable<T: Real>(
    img: &ImagePlane,
    channel: usize,
    k: &KernelMatrix<T>,
) -> Result<Vec<T>, BlurError> {
    check_fits(img, k)?;
    let src = img.channel(channel);
    let (w, h) = (img.width, img.height);
    let factor = k.factor();
    let radius = k.radius();

    let mut horiz = vec![T::zero(); w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        convolve_line(&factor, radius, w, |x| T::from_u8(row[x]).unwrap(), &mut horiz[y * w..(y + 1) * w]);
    }

    let mut out = vec![T::zero(); w * h];
    let mut column = vec![T::zero(); h];
    for x in 0..w {
        convolve_line(&factor, radius, h, |y| horiz[y * w + x], &mut column);
        for (y, &v) in column.iter().enumerate() {
            out[y * w + x] = v;
        }
    }
    Ok(out)
}

fn assemble(
    img: &ImagePlane,
    mut per_channel: impl FnMut(usize) -> Result<Vec<u8>, BlurError>,
) -> Result<ImagePlane, BlurError> {
    let mut pixels = vec![0u8; img.pixels.len()];
    for c in 0..img.channels {
        for (i, v) in per_channel(c)?.into_iter().enumerate() {
            pixels[i * img.channels + c] = v;
        }
    }
    ImagePlane::new(img.width, img.height, img.channels, pixels)
}

/// Gaussian blur using the separable two-pass form. Each channel is
/// processed independently; results are rounded half-up and clamped to
/// `[0, 255]`.
pub fn blur_plane<T: Real>(img: &ImagePlane, k: &KernelMatrix<T>) -> Result<ImagePlane, BlurError> {
    assemble(img, |c| {
        Ok(blur_channel_real_separable(img, c, k)?
            .into_iter()
            .map(quantize)
            .collect())
    })
}

/// Reference blur using the full 2-D kernel at every pixel.
pub fn blur_plane_direct<T: Real>(
    img: &ImagePlane,
    k: &KernelMatrix<T>,
) -> Result<ImagePlane, BlurError> {
    assemble(img, |c| {
        Ok(blur_channel_real(img, c, k)?
            .into_iter()
            .map(quantize)
            .collect())
    })
}
