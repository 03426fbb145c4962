#pragma once

// JSON mapping of the configuration types, the binary matrix container and
// small CSV helpers shared by the benchmark harness and the CLI.
//
// Container layout: the 8-byte magic "NGMCABIN", a little-endian u64 giving
// the length of a UTF-8 JSON header, the header itself, then every matrix
// listed in header["matrices"] as rows·cols little-endian f64 values in
// row-major order, in the listed order.

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "ngmca/algorithms.hpp"
#include "ngmca/datagen.hpp"

namespace ngmca {

using Json = nlohmann::json;

// --- Numbers -----------------------------------------------------------------

/// Shortest text that parses back to the same double; "inf", "-inf", "nan".
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text) {
  double x = 0.0;
  const char* first = text.data();
  if (!text.empty() && text.front() == '+') ++first;
  const auto res = std::from_chars(first, text.data() + text.size(), x);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    throw Error(ErrorCode::InvalidArgument, "not a number: '" + std::string(text) + "'");
  return x;
}

/// SNR values in JSON: a number, or "noiseless" / "inf" for +∞.
inline double snr_from_json(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "noiseless" || s == "inf") return kNoiseless;
    return parse_double(s);
  }
  if (j.is_null()) return kNoiseless;
  throw Error(ErrorCode::InvalidArgument, "snr_db must be a number or \"noiseless\"");
}

inline Json snr_to_json(double snr_db) {
  if (std::isinf(snr_db) && snr_db > 0.0) return "noiseless";
  return snr_db;
}

// --- Configuration types ------------------------------------------------------

namespace detail {

template <class T>
void read_if(const Json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

inline void reject_unknown(const Json& j, std::initializer_list<std::string_view> known, const char* what) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || k == key;
    if (!ok) throw Error(ErrorCode::InvalidArgument, std::string(what) + ": unknown field '" + key + "'");
  }
}

}  // namespace detail

inline InstanceSpec instance_spec_from_json(const Json& j) {
  detail::reject_unknown(j, {"m", "n", "r", "p_A", "p_S", "alpha_A", "alpha_S", "snr_db", "seed"}, "InstanceSpec");
  InstanceSpec s;
  detail::read_if(j, "m", s.m);
  detail::read_if(j, "n", s.n);
  detail::read_if(j, "r", s.r);
  detail::read_if(j, "p_A", s.p_A);
  detail::read_if(j, "p_S", s.p_S);
  detail::read_if(j, "alpha_A", s.alpha_A);
  detail::read_if(j, "alpha_S", s.alpha_S);
  if (j.contains("snr_db")) s.snr_db = snr_from_json(j.at("snr_db"));
  detail::read_if(j, "seed", s.seed);
  s.validate();
  return s;
}

inline Json to_json(const InstanceSpec& s) {
  return Json{{"m", s.m},           {"n", s.n},         {"r", s.r},
              {"p_A", s.p_A},       {"p_S", s.p_S},     {"alpha_A", s.alpha_A},
              {"alpha_S", s.alpha_S}, {"snr_db", snr_to_json(s.snr_db)}, {"seed", s.seed}};
}

inline ThresholdMode threshold_mode_from_string(const std::string& s) {
  if (s == "soft") return ThresholdMode::soft;
  if (s == "hard") return ThresholdMode::hard;
  throw Error(ErrorCode::InvalidArgument, "thresholding_mode must be \"soft\" or \"hard\"");
}

inline SubsolverOptions subsolver_from_json(const Json& j) {
  detail::reject_unknown(j, {"max_inner_iterations", "rel_tol", "thresholding_mode", "lipschitz_scale", "monotone_restart"},
                         "SubsolverOptions");
  SubsolverOptions o;
  detail::read_if(j, "max_inner_iterations", o.max_inner_iterations);
  detail::read_if(j, "rel_tol", o.rel_tol);
  if (j.contains("thresholding_mode")) o.thresholding_mode = threshold_mode_from_string(j.at("thresholding_mode"));
  detail::read_if(j, "lipschitz_scale", o.lipschitz_scale);
  detail::read_if(j, "monotone_restart", o.monotone_restart);
  o.validate();
  return o;
}

inline Json to_json(const SubsolverOptions& o) {
  return Json{{"max_inner_iterations", o.max_inner_iterations},
              {"rel_tol", o.rel_tol},
              {"thresholding_mode", o.thresholding_mode == ThresholdMode::soft ? "soft" : "hard"},
              {"lipschitz_scale", o.lipschitz_scale},
              {"monotone_restart", o.monotone_restart}};
}

inline AlgorithmConfig algorithm_config_from_json(const Json& j) {
  detail::reject_unknown(j,
                         {"algorithm_id", "rank", "outer_iterations", "tau_final", "seed", "subsolver",
                          "sparsity_target", "record_objective", "stability_tol", "max_extra_refinement"},
                         "AlgorithmConfig");
  AlgorithmConfig c;
  if (j.contains("algorithm_id")) c.algorithm_id = parse_algorithm_id(j.at("algorithm_id").get<std::string>());
  detail::read_if(j, "rank", c.rank);
  detail::read_if(j, "outer_iterations", c.outer_iterations);
  detail::read_if(j, "tau_final", c.tau_final);
  detail::read_if(j, "seed", c.seed);
  if (j.contains("subsolver")) c.subsolver = subsolver_from_json(j.at("subsolver"));
  if (auto it = j.find("sparsity_target"); it != j.end() && !it->is_null()) c.sparsity_target = it->get<double>();
  detail::read_if(j, "record_objective", c.record_objective);
  detail::read_if(j, "stability_tol", c.stability_tol);
  detail::read_if(j, "max_extra_refinement", c.max_extra_refinement);
  c.validate();
  return c;
}

inline Json to_json(const AlgorithmConfig& c) {
  Json j{{"algorithm_id", std::string(to_string(c.algorithm_id))},
         {"rank", c.rank},
         {"outer_iterations", c.outer_iterations},
         {"tau_final", c.tau_final},
         {"seed", c.seed},
         {"subsolver", to_json(c.subsolver)},
         {"sparsity_target", nullptr},
         {"record_objective", c.record_objective},
         {"stability_tol", c.stability_tol},
         {"max_extra_refinement", c.max_extra_refinement}};
  if (c.sparsity_target) j["sparsity_target"] = *c.sparsity_target;
  return j;
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

// --- Binary container ---------------------------------------------------------

inline constexpr char kContainerMagic[8] = {'N', 'G', 'M', 'C', 'A', 'B', 'I', 'N'};

struct Container {
  /// Free-form metadata; "matrices" is managed by the reader and writer.
  Json header = Json::object();
  std::vector<std::pair<std::string, Matrix>> matrices;

  const Matrix& get(const std::string& name) const {
    for (const auto& [key, m] : matrices)
      if (key == name) return m;
    throw Error(ErrorCode::InvalidArgument, "container has no matrix '" + name + "'");
  }
  bool has(const std::string& name) const {
    for (const auto& entry : matrices)
      if (entry.first == name) return true;
    return false;
  }
};

namespace detail {

inline void put_u64_le(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64_le(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw Error(ErrorCode::Io, "truncated container");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline void write_container(const std::filesystem::path& path, const Container& c) {
  Json header = c.header;
  header["matrices"] = Json::array();
  for (const auto& [name, m] : c.matrices) header["matrices"].push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(kContainerMagic, 8);
  detail::put_u64_le(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& entry : c.matrices) {
    const Matrix& m = entry.second;
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) detail::put_u64_le(out, std::bit_cast<std::uint64_t>(m(i, j)));
  }
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

inline Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kContainerMagic, 8) != 0)
    throw Error(ErrorCode::Io, path.string() + " is not an NGMCABIN container");
  const std::uint64_t len = detail::get_u64_le(in);
  if (len > (std::uint64_t{1} << 32)) throw Error(ErrorCode::Io, "implausible container header length");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw Error(ErrorCode::Io, "truncated container header");
  Container c;
  try {
    c.header = Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Io, std::string("bad container header: ") + e.what());
  }
  for (const auto& desc : c.header.at("matrices")) {
    const Index rows = desc.at("rows").get<Index>(), cols = desc.at("cols").get<Index>();
    if (rows < 0 || cols < 0) throw Error(ErrorCode::Io, "negative matrix dimension in container");
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = std::bit_cast<double>(detail::get_u64_le(in));
    c.matrices.emplace_back(desc.at("name").get<std::string>(), std::move(m));
  }
  c.header.erase("matrices");
  return c;
}

inline Container instance_container(const ProblemInstance& inst) {
  Container c;
  c.header = {{"kind", "instance"}, {"spec", to_json(inst.spec)}};
  c.matrices = {{"Y", inst.Y}, {"A_ref", inst.A_ref}, {"S_ref", inst.S_ref}, {"Z", inst.Z}};
  return c;
}

inline ProblemInstance instance_from_container(const Container& c) {
  if (c.header.value("kind", "") != "instance") throw Error(ErrorCode::Io, "container is not an instance");
  ProblemInstance inst;
  inst.spec = instance_spec_from_json(c.header.at("spec"));
  inst.Y = c.get("Y");
  inst.A_ref = c.get("A_ref");
  inst.S_ref = c.get("S_ref");
  inst.Z = c.get("Z");
  return inst;
}

// --- CSV -----------------------------------------------------------------------

/// Quotes a field when it contains a comma, quote or line break.
inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

inline std::string csv_row(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += csv_field(fields[i]);
  }
  line += "\r\n";
  return line;
}

/// Parses RFC-4180 text into rows of fields.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    any = true;
    if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (ch == '\r' || ch == '\n') {
      if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += ch;
    }
  }
  if (quoted) throw Error(ErrorCode::InvalidArgument, "unterminated quoted CSV field");
  if (any || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace ngmca
