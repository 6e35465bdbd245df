//! Raster types, grayscale ingestion, and the convolution primitives used by
//! every later stage.
//!
//! All arithmetic is `f64`. Filter-bank convolution goes through the FFT with
//! periodic boundaries; small spatial kernels use [`direct_convolve`].

mod convolve;
mod fft;
mod raster;

pub use convolve::{direct_convolve, gaussian_blur, gaussian_taps, separable_convolve, Boundary};
pub use fft::{bin_frequency, convolve_spectrum, fft_convolve, ComplexSpectrum, Fft2d};
pub use raster::{gray_from_dynamic, load_grayscale, GrayImage, ScalarField};
pub use rustfft::num_complex::Complex64;
