#include "edgeadapt/traces.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "edgeadapt/rng.hpp"
#include "edgeadapt/textio.hpp"

namespace edgeadapt {

namespace {

void check_params(const GeneratorParams& p) {
  if (p.segment_count <= 0) throw ParameterError("segment_count must be > 0");
  if (p.duration_s <= 0) throw ParameterError("duration_s must be > 0");
  if (p.fps <= 0) throw ParameterError("fps must be > 0");
  if (p.base_size_mean_mb <= 0) {
    throw ParameterError("base_size_mean_mb must be > 0");
  }
  if (p.scene_phi < 0 || p.scene_phi >= 1 || p.difficulty_phi < 0 ||
      p.difficulty_phi >= 1) {
    throw ParameterError("AR coefficients must lie in [0, 1)");
  }
  if (p.scene_volatility < 0 || p.difficulty_volatility < 0) {
    throw ParameterError("volatility must be non-negative");
  }
  if (p.size_resolution_exponent <= 0 || p.qp_decay <= 0) {
    throw ParameterError("size exponents must be positive");
  }
  if (p.res_penalty <= 0 || p.qp_penalty <= 0 || p.version_penalty <= 0) {
    throw ParameterError("accuracy penalties must be positive");
  }
  if (p.accuracy_sharpness <= 0) {
    throw ParameterError("accuracy_sharpness must be positive");
  }
  if (p.noise_level < 0) throw ParameterError("noise_level must be >= 0");
  if (p.crossover_prob < 0 || p.crossover_prob > 1) {
    throw ParameterError("crossover_prob must lie in [0, 1]");
  }
  if (p.crossover_strength < 0 || p.crossover_strength >= 1) {
    throw ParameterError("crossover_strength must lie in [0, 1)");
  }
}

std::string provenance_string(const GeneratorParams& p, std::uint64_t seed) {
  std::ostringstream os;
  os << "generator seed=" << seed
     << " segment_count=" << p.segment_count
     << " duration_s=" << format_real(p.duration_s)
     << " fps=" << p.fps
     << " base_size_mean_mb=" << format_real(p.base_size_mean_mb)
     << " scene_phi=" << format_real(p.scene_phi)
     << " scene_volatility=" << format_real(p.scene_volatility)
     << " size_resolution_exponent=" << format_real(p.size_resolution_exponent)
     << " qp_decay=" << format_real(p.qp_decay)
     << " difficulty_size_coupling=" << format_real(p.difficulty_size_coupling)
     << " difficulty_phi=" << format_real(p.difficulty_phi)
     << " difficulty_volatility=" << format_real(p.difficulty_volatility)
     << " res_penalty=" << format_real(p.res_penalty)
     << " qp_penalty=" << format_real(p.qp_penalty)
     << " version_penalty=" << format_real(p.version_penalty)
     << " accuracy_sharpness=" << format_real(p.accuracy_sharpness)
     << " noise_level=" << format_real(p.noise_level)
     << " crossover_prob=" << format_real(p.crossover_prob)
     << " crossover_strength=" << format_real(p.crossover_strength);
  return os.str();
}

}  // namespace

TraceSet generate_trace(const GeneratorParams& params, std::uint64_t seed) {
  check_params(params);
  TraceSet trace;
  trace.fps = params.fps;
  trace.provenance = provenance_string(params, seed);

  const ConfigurationSpace& space = trace.space;
  const double r_max = space.resolutions().front();
  const int q_min = space.qps().front();
  const std::size_t versions = space.model_versions().size();

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  const double mu_s = std::log(params.base_size_mean_mb);
  double s = mu_s;  // log anchor size
  double d = 0.0;   // log difficulty

  trace.segments.reserve(params.segment_count);
  std::vector<double> vpen(versions);
  for (int i = 0; i < params.segment_count; ++i) {
    s = mu_s + params.scene_phi * (s - mu_s) +
        params.scene_volatility * normal(rng);
    d = params.difficulty_phi * d + params.difficulty_volatility * normal(rng);
    const double scene_size =
        std::exp(s + params.difficulty_size_coupling * d);
    const double difficulty = std::exp(d);

    SegmentRecord rec;
    rec.segment_id = i;
    rec.duration_s = params.duration_s;
    rec.scene_latents = {s, d};

    rec.bitrate_mb.reserve(space.compression_settings());
    for (double r : space.resolutions()) {
      for (int q : space.qps()) {
        rec.bitrate_mb.push_back(scene_size *
                                 std::pow(r, params.size_resolution_exponent) *
                                 std::exp(-params.qp_decay * (q - q_min)));
      }
    }

    // Version penalty ladder; a crossover event jitters it so adjacent model
    // rankings can flip for this segment.
    for (std::size_t v = 0; v < versions; ++v) {
      vpen[v] = params.version_penalty * static_cast<double>(v);
    }
    if (uniform(rng) < params.crossover_prob) {
      for (std::size_t v = 1; v < versions; ++v) {
        vpen[v] *= 1.0 + params.crossover_strength * (2.0 * uniform(rng) - 1.0);
      }
    }

    rec.accuracy.reserve(space.size());
    for (std::size_t v = 0; v < versions; ++v) {
      for (double r : space.resolutions()) {
        for (int q : space.qps()) {
          double pen = difficulty * (params.res_penalty * (r_max - r) +
                                     params.qp_penalty * (q - q_min) + vpen[v]);
          if (params.noise_level > 0) {
            pen += params.noise_level * normal(rng);
          }
          rec.accuracy.push_back(std::exp(
              -std::pow(std::max(pen, 0.0), params.accuracy_sharpness)));
        }
      }
    }
    // Ground-truth convention: the anchor configuration defines accuracy 1.
    rec.accuracy[space.index_of(space.anchor())] = 1.0;

    trace.segments.push_back(std::move(rec));
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

std::vector<ValidationIssue> validate_trace(const TraceSet& trace) {
  std::vector<ValidationIssue> issues;
  const ConfigurationSpace& space = trace.space;
  if (trace.fps <= 0) {
    issues.push_back({-1, "fps must be positive"});
  }
  const std::size_t nq = space.qps().size();

  for (std::size_t idx = 0; idx < trace.segments.size(); ++idx) {
    const SegmentRecord& rec = trace.segments[idx];
    const int id = rec.segment_id;
    if (rec.segment_id != static_cast<int>(idx)) {
      issues.push_back({id, "segment ids not consecutive from 0"});
    }
    if (rec.duration_s <= 0) {
      issues.push_back({id, "duration must be positive"});
    }
    if (rec.bitrate_mb.size() != space.compression_settings()) {
      issues.push_back({id, "bitrate table size does not match space"});
      continue;
    }
    if (rec.accuracy.size() != space.size()) {
      issues.push_back({id, "accuracy table size does not match space"});
      continue;
    }

    for (std::size_t ri = 0; ri < space.resolutions().size(); ++ri) {
      for (std::size_t qi = 0; qi < nq; ++qi) {
        const double size = rec.bitrate_mb[ri * nq + qi];
        if (size <= 0) {
          issues.push_back({id, "non-positive bitrate at r=" +
                                    format_real(space.resolutions()[ri]) +
                                    " qp=" + std::to_string(space.qps()[qi])});
        }
        if (qi > 0 && size >= rec.bitrate_mb[ri * nq + qi - 1]) {
          issues.push_back(
              {id, "bitrate not strictly decreasing in qp at r=" +
                       format_real(space.resolutions()[ri]) + " (qp " +
                       std::to_string(space.qps()[qi - 1]) + " -> " +
                       std::to_string(space.qps()[qi]) + ")"});
        }
        if (ri > 0 && size >= rec.bitrate_mb[(ri - 1) * nq + qi]) {
          issues.push_back(
              {id, "bitrate not strictly increasing in resolution at qp=" +
                       std::to_string(space.qps()[qi]) + " (r " +
                       format_real(space.resolutions()[ri]) + " -> " +
                       format_real(space.resolutions()[ri - 1]) + ")"});
        }
      }
    }

    for (std::size_t c = 0; c < rec.accuracy.size(); ++c) {
      const double a = rec.accuracy[c];
      if (a < 0.0 || a > 1.0) {
        const Configuration cfg = space.config_at(c);
        issues.push_back({id, "accuracy outside [0,1] at r=" +
                                  format_real(cfg.resolution_scale) +
                                  " qp=" + std::to_string(cfg.qp) + " v=" +
                                  std::to_string(cfg.model_version)});
      }
    }
    if (rec.accuracy[space.index_of(space.anchor())] != 1.0) {
      issues.push_back({id, "anchor configuration accuracy must equal 1"});
    }
  }
  return issues;
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

namespace {

constexpr int kTraceSchemaVersion = 1;
constexpr int kBandwidthSchemaVersion = 1;

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  // Next non-empty line; throws on EOF.
  std::string next(const char* context) {
    std::string line;
    while (std::getline(in_, line)) {
      ++lineno_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return line;
    }
    throw ParseError(std::string("unexpected end of file while reading ") +
                     context);
  }

  int lineno() const { return lineno_; }

 private:
  std::istream& in_;
  int lineno_ = 0;
};

std::vector<std::string> expect_keyword(LineReader& r, const char* keyword) {
  const std::string line = r.next(keyword);
  auto toks = split_ws(line);
  if (toks.empty() || toks[0] != keyword) {
    throw ParseError("expected '" + std::string(keyword) + "' at line " +
                     std::to_string(r.lineno()) + ", got '" + line + "'");
  }
  return toks;
}

std::vector<double> parse_reals(const std::vector<std::string>& toks,
                                std::size_t from, std::size_t count,
                                const char* what) {
  if (toks.size() != from + count) {
    throw ParseError(std::string(what) + ": expected " +
                     std::to_string(count) + " values, got " +
                     std::to_string(toks.size() - from));
  }
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = from; i < toks.size(); ++i) {
    out.push_back(parse_real(toks[i], what));
  }
  return out;
}

}  // namespace

void save_trace(const TraceSet& trace, const std::filesystem::path& path) {
  if (trace.provenance.find('\n') != std::string::npos) {
    throw ParameterError("provenance must be a single line");
  }
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path.string() + " for writing");

  out << "edgeadapt-trace " << kTraceSchemaVersion << "\n";
  out << "resolutions";
  for (double r : trace.space.resolutions()) out << ' ' << format_real(r);
  out << "\nqps";
  for (int q : trace.space.qps()) out << ' ' << q;
  out << "\nmodels";
  for (int v : trace.space.model_versions()) out << ' ' << v;
  out << "\nfps " << trace.fps;
  out << "\nsegments " << trace.segments.size();
  out << "\nprovenance " << (trace.provenance.empty() ? "none"
                                                      : trace.provenance);
  out << "\n";
  for (const SegmentRecord& rec : trace.segments) {
    out << "segment " << rec.segment_id << ' ' << format_real(rec.duration_s)
        << "\n";
    out << "latents " << rec.scene_latents.size();
    for (double v : rec.scene_latents) out << ' ' << format_real(v);
    out << "\nbitrates";
    for (double v : rec.bitrate_mb) out << ' ' << format_real(v);
    out << "\naccuracies";
    for (double v : rec.accuracy) out << ' ' << format_real(v);
    out << "\n";
  }
  out << "end\n";
  if (!out) throw ParseError("write failed: " + path.string());
}

TraceSet parse_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  LineReader reader(in);

  auto header = expect_keyword(reader, "edgeadapt-trace");
  if (header.size() != 2) throw ParseError("malformed schema header");
  const long long version = parse_integer(header[1], "schema version");
  if (version != kTraceSchemaVersion) {
    throw ParseError("trace schema version " + std::to_string(version) +
                     " unsupported; this reader handles version " +
                     std::to_string(kTraceSchemaVersion));
  }

  auto res_toks = expect_keyword(reader, "resolutions");
  std::vector<double> resolutions;
  for (std::size_t i = 1; i < res_toks.size(); ++i) {
    resolutions.push_back(parse_real(res_toks[i], "resolution"));
  }
  auto qp_toks = expect_keyword(reader, "qps");
  std::vector<int> qps;
  for (std::size_t i = 1; i < qp_toks.size(); ++i) {
    qps.push_back(static_cast<int>(parse_integer(qp_toks[i], "qp")));
  }
  auto model_toks = expect_keyword(reader, "models");
  std::vector<int> models;
  for (std::size_t i = 1; i < model_toks.size(); ++i) {
    models.push_back(static_cast<int>(parse_integer(model_toks[i], "model")));
  }

  TraceSet trace;
  try {
    trace.space = ConfigurationSpace(resolutions, qps, models);
  } catch (const ConfigurationError& e) {
    throw ParseError(std::string("invalid configuration space: ") + e.what());
  }

  auto fps_toks = expect_keyword(reader, "fps");
  if (fps_toks.size() != 2) throw ParseError("malformed fps line");
  trace.fps = static_cast<int>(parse_integer(fps_toks[1], "fps"));

  auto count_toks = expect_keyword(reader, "segments");
  if (count_toks.size() != 2) throw ParseError("malformed segments line");
  const long long count = parse_integer(count_toks[1], "segment count");
  if (count < 0) throw ParseError("negative segment count");

  const std::string prov_line = reader.next("provenance");
  if (prov_line.rfind("provenance ", 0) != 0) {
    throw ParseError("expected 'provenance' at line " +
                     std::to_string(reader.lineno()));
  }
  trace.provenance = prov_line.substr(11);
  if (trace.provenance == "none") trace.provenance.clear();

  trace.segments.reserve(static_cast<std::size_t>(count));
  for (long long i = 0; i < count; ++i) {
    auto seg_toks = expect_keyword(reader, "segment");
    if (seg_toks.size() != 3) throw ParseError("malformed segment line");
    SegmentRecord rec;
    rec.segment_id =
        static_cast<int>(parse_integer(seg_toks[1], "segment id"));
    rec.duration_s = parse_real(seg_toks[2], "duration");

    auto lat_toks = expect_keyword(reader, "latents");
    if (lat_toks.size() < 2) throw ParseError("malformed latents line");
    const long long nlat = parse_integer(lat_toks[1], "latent count");
    rec.scene_latents = parse_reals(lat_toks, 2,
                                    static_cast<std::size_t>(nlat), "latents");

    auto bit_toks = expect_keyword(reader, "bitrates");
    rec.bitrate_mb = parse_reals(bit_toks, 1,
                                 trace.space.compression_settings(),
                                 "bitrates");
    auto acc_toks = expect_keyword(reader, "accuracies");
    rec.accuracy = parse_reals(acc_toks, 1, trace.space.size(), "accuracies");
    trace.segments.push_back(std::move(rec));
  }
  const std::string trailer = reader.next("end marker");
  if (trailer != "end") throw ParseError("missing end marker");
  return trace;
}

TraceSet load_trace(const std::filesystem::path& path) {
  TraceSet trace = parse_trace(path);
  const auto issues = validate_trace(trace);
  if (!issues.empty()) {
    throw ParseError("trace violates invariants: segment " +
                     std::to_string(issues.front().segment_id) + ": " +
                     issues.front().what + " (" +
                     std::to_string(issues.size()) + " issue(s) total)");
  }
  return trace;
}

void save_bandwidth(const BandwidthTrace& trace,
                    const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path.string() + " for writing");
  out << "edgeadapt-bandwidth " << kBandwidthSchemaVersion << "\n";
  out << "slots " << trace.mbps.size() << "\n";
  for (double v : trace.mbps) out << format_real(v) << "\n";
  out << "end\n";
  if (!out) throw ParseError("write failed: " + path.string());
}

BandwidthTrace load_bandwidth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  LineReader reader(in);
  auto header = expect_keyword(reader, "edgeadapt-bandwidth");
  if (header.size() != 2) throw ParseError("malformed schema header");
  const long long version = parse_integer(header[1], "schema version");
  if (version != kBandwidthSchemaVersion) {
    throw ParseError("bandwidth schema version " + std::to_string(version) +
                     " unsupported; this reader handles version " +
                     std::to_string(kBandwidthSchemaVersion));
  }
  auto count_toks = expect_keyword(reader, "slots");
  if (count_toks.size() != 2) throw ParseError("malformed slots line");
  const long long count = parse_integer(count_toks[1], "slot count");
  if (count <= 0) throw ParseError("bandwidth trace must have slots");
  BandwidthTrace trace;
  trace.mbps.reserve(static_cast<std::size_t>(count));
  for (long long i = 0; i < count; ++i) {
    const double v = parse_real(reader.next("bandwidth value"), "bandwidth");
    if (v <= 0) throw ParseError("bandwidth values must be positive");
    trace.mbps.push_back(v);
  }
  if (reader.next("end marker") != "end") {
    throw ParseError("missing end marker");
  }
  return trace;
}

}  // namespace edgeadapt
