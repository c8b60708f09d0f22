//! Charge spectra: histograms, peak finding, multi-Gaussian fits and
//! resolution metrics.

mod fit;
mod histogram;
mod io;
mod metrics;
mod peaks;

pub use fit::{fit_multi_gaussian, guesses_from_bins, FitOptions, FitResult, GaussianPeak, PeakGuess};
pub use histogram::{auto_bin_width, build_histogram, Histogram};
pub use io::{write_histogram_csv, write_metrics_csv, write_peaks_csv};
pub use metrics::{
    delta_pp, fom, overlap_from_fom, visibility, DeltaPoint, FomPoint, Overlap, SpectrumMetrics, VisibilityOptions, VisibilityPoint,
    FWHM_PER_SIGMA,
};
pub use peaks::{find_peaks, find_peaks_in};
