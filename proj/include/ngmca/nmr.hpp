#pragma once

// Synthetic NMR sources: peak lists rendered on a sample grid with Laplacian
// line broadening.
//
// Peak-list files are plain text, one `position<TAB>amplitude` pair per line,
// `#` starting a comment. Positions are fractions of the spectral window in
// [0, 1) unless the file contains the directive `# units: samples`, in which
// case they are sample indices. The compound name is the file stem.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "ngmca/datagen.hpp"
#include "ngmca/linops.hpp"

namespace ngmca {

enum class PositionUnit { fraction, samples };

struct Peak {
  double position = 0.0;
  double amplitude = 1.0;
};

struct PeakList {
  std::vector<Peak> peaks;
  std::string compound_name;
  PositionUnit unit = PositionUnit::fraction;
};

/// Laplacian half-width b for a given full width at half maximum.
inline double laplacian_width(double fwhm_samples) { return fwhm_samples / (2.0 * std::numbers::ln2); }

/// Kernels are truncated beyond this many half-widths (tail below 1e-5).
inline constexpr double kLaplacianSupport = 12.0;

namespace detail {

inline double peak_sample_position(const Peak& p, PositionUnit unit, Index n) {
  const double pos = unit == PositionUnit::fraction ? p.position * static_cast<double>(n) : p.position;
  const bool in_range = unit == PositionUnit::fraction ? (p.position >= 0.0 && p.position < 1.0)
                                                       : (pos >= 0.0 && pos < static_cast<double>(n));
  if (!in_range) throw Error(ErrorCode::PeakOutOfRange, "peak position outside the sample grid");
  return pos;
}

inline void add_laplacian(Vector& row, double center, double amplitude, double width) {
  const Index n = row.size();
  const double reach = kLaplacianSupport * width;
  const auto lo = std::max<Index>(0, static_cast<Index>(std::ceil(center - reach)));
  const auto hi = std::min<Index>(n - 1, static_cast<Index>(std::floor(center + reach)));
  for (Index t = lo; t <= hi; ++t) row(t) += amplitude * std::exp(-std::abs(static_cast<double>(t) - center) / width);
}

}  // namespace detail

/// One row per peak list: Σ amplitude · exp(−|t − t_peak| / b), b = fwhm / (2 ln 2).
inline Matrix gen_nmr_sources(const std::vector<PeakList>& lists, Index n, double fwhm_samples) {
  if (!(fwhm_samples > 0.0) || static_cast<double>(n) < 2.0 * fwhm_samples)
    throw Error(ErrorCode::InvalidArgument, "gen_nmr_sources: need n >= 2 * fwhm > 0");
  const double width = laplacian_width(fwhm_samples);
  Matrix out = Matrix::Zero(static_cast<Index>(lists.size()), n);
  for (std::size_t i = 0; i < lists.size(); ++i) {
    Vector row = Vector::Zero(n);
    for (const Peak& p : lists[i].peaks) {
      if (!(p.amplitude > 0.0)) throw Error(ErrorCode::InvalidArgument, "peak amplitudes must be > 0");
      const double center = detail::peak_sample_position(p, lists[i].unit, n);
      detail::add_laplacian(row, center, p.amplitude, width);
    }
    out.row(static_cast<Index>(i)) = row.transpose();
  }
  return out;
}

inline PeakList parse_peak_list(std::istream& in, std::string compound_name) {
  PeakList list;
  list.compound_name = std::move(compound_name);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      const std::string comment = line.substr(hash + 1);
      if (comment.find("units:") != std::string::npos) {
        if (comment.find("samples") != std::string::npos)
          list.unit = PositionUnit::samples;
        else if (comment.find("fraction") != std::string::npos)
          list.unit = PositionUnit::fraction;
      }
      line.erase(hash);
    }
    std::istringstream fields(line);
    Peak p;
    if (!(fields >> p.position)) continue;  // blank line
    if (!(fields >> p.amplitude))
      throw Error(ErrorCode::Io, list.compound_name + ":" + std::to_string(line_no) + ": missing amplitude");
    list.peaks.push_back(p);
  }
  return list;
}

inline PeakList read_peak_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open peak list " + path.string());
  return parse_peak_list(in, path.stem().string());
}

/// Every `*.peaks` file of a directory, sorted by file name.
inline std::vector<PeakList> load_peak_corpus(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".peaks") files.push_back(entry.path());
  if (files.empty()) throw Error(ErrorCode::Io, "no .peaks files in " + dir.string());
  std::sort(files.begin(), files.end());
  std::vector<PeakList> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(read_peak_list(f));
  return out;
}

/// ⟨sᵢ, sⱼ⟩ / (‖sᵢ‖‖sⱼ‖) for every pair of rows.
inline Matrix normalized_scalar_products(const Matrix& sources) {
  const Vector norms = sources.rowwise().norm();
  Matrix g = sources * sources.transpose();
  for (Index i = 0; i < g.rows(); ++i)
    for (Index j = 0; j < g.cols(); ++j) g(i, j) /= norms(i) * norms(j);
  return g;
}

/// Y = A_ref S_ref + Z for fixed sources: A_ref (m×r) has i.i.d. |G_α_A|
/// entries and Z is Gaussian at the requested data SNR. The A_ref and noise
/// streams are those of gen_instance for the same seed.
inline ProblemInstance gen_nmr_instance(const Matrix& sources, Index m, double snr_db, std::uint64_t seed,
                                        double alpha_A = 2.0) {
  if (sources.rows() < 1 || m < 1) throw Error(ErrorCode::InvalidArgument, "gen_nmr_instance: empty problem");
  InstanceSpec spec;
  spec.m = m;
  spec.n = sources.cols();
  spec.r = sources.rows();
  spec.p_A = 1.0;
  spec.alpha_A = alpha_A;
  spec.snr_db = snr_db;
  spec.seed = seed;
  spec.validate();
  ProblemInstance inst;
  inst.spec = spec;
  CounterRng mixing(seed, {tag(StreamRole::mixing), 0});
  inst.A_ref = gen_factor(m, spec.r, 1.0, alpha_A, mixing);
  inst.S_ref = sources;
  CounterRng noise(seed, {tag(StreamRole::noise)});
  auto noisy = add_noise_snr(inst.A_ref * inst.S_ref, snr_db, noise);
  inst.Y = std::move(noisy.Y);
  inst.Z = std::move(noisy.Z);
  return inst;
}

}  // namespace ngmca
