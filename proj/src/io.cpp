#include "trurm/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace trurm {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

[[noreturn]] void format_error(const std::string& what) { fail(ErrorCode::Format, what); }

template <typename T>
T byteswap_if_big(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

template <typename T>
void append_le(std::string& out, T v) {
  v = byteswap_if_big(v);
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.append(b, sizeof(T));
}

template <typename T>
T read_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return byteswap_if_big(v);
}

void append_series(std::string& out, std::span<const double> s) {
  for (double v : s) append_le(out, v);
}

/// Reader over the packed payload with bounds checks.
class Payload {
public:
  Payload(const std::string& bytes, std::size_t offset) : bytes_(bytes), pos_(offset) {}
  Series take(std::size_t n) {
    if (bytes_.size() - pos_ < n * sizeof(double)) format_error("payload shorter than header declares");
    Series out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = read_le<double>(bytes_.data() + pos_ + i * 8);
    pos_ += n * sizeof(double);
    return out;
  }
  void finish() const {
    if (pos_ != bytes_.size()) format_error("payload longer than header declares");
  }

private:
  const std::string& bytes_;
  std::size_t pos_;
};

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    format_error(what + ": " + e.what());
  }
}

/// Splits "header\npayload" and checks the format tag.
std::pair<json, std::size_t> split_header(const std::string& bytes, const std::string& format) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) format_error("missing header line");
  json header = parse_json(bytes.substr(0, nl), "header");
  if (!header.is_object() || header.value("format", "") != format)
    format_error("expected a " + format + " file");
  if (header.value("version", 0) != kFormatVersion) format_error("unsupported format version");
  return {std::move(header), nl + 1};
}

std::string with_header(const json& header, const std::string& payload) {
  std::string out = header.dump();
  out.push_back('\n');
  out += payload;
  return out;
}

template <typename T>
T get_field(const json& j, const char* key) {
  if (!j.contains(key)) format_error(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    format_error(std::string("field '") + key + "': " + e.what());
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = get_field<T>(j, key);
}

json segment_meta(const PhaseSegment& s) {
  json j;
  j["source_id"] = s.source_id;
  j["segment_index"] = s.segment_index;
  j["start_time_s"] = s.start_time;
  j["sample_rate"] = s.sample_rate;
  j["label"] = s.label;
  j["truth_bpm"] = s.truth_bpm ? json(*s.truth_bpm) : json(nullptr);
  return j;
}

PhaseSegment parse_segment_meta(const json& j) {
  PhaseSegment s;
  read_opt(j, "source_id", s.source_id);
  s.segment_index = get_field<std::size_t>(j, "segment_index");
  s.start_time = get_field<double>(j, "start_time_s");
  s.sample_rate = get_field<double>(j, "sample_rate");
  read_opt(j, "label", s.label);
  if (j.contains("truth_bpm") && !j.at("truth_bpm").is_null())
    s.truth_bpm = get_field<double>(j, "truth_bpm");
  if (!(s.sample_rate > 0)) format_error("sample_rate must be positive");
  return s;
}

json band_json(Band b) { return json::array({b.low_hz, b.high_hz}); }

Band parse_band(const json& j) {
  if (!j.is_array() || j.size() != 2) format_error("band must be [low, high]");
  return Band{j[0].get<double>(), j[1].get<double>()};
}

json radar_json(const RadarConfig& c) {
  json j;
  j["start_frequency_hz"] = c.start_frequency_hz;
  j["bandwidth_hz"] = c.bandwidth_hz;
  j["samples_per_chirp"] = c.samples_per_chirp;
  j["chirps_per_frame"] = c.chirps_per_frame;
  j["frame_period_s"] = c.frame_period_s;
  j["chirp_cycle_time_s"] = c.chirp_cycle_time_s;
  j["adc_rate_hz"] = c.adc_rate_hz;
  return j;
}

RadarConfig parse_radar(const json& j) {
  if (!j.is_object()) format_error("radar config must be an object");
  RadarConfig c;
  read_opt(j, "start_frequency_hz", c.start_frequency_hz);
  read_opt(j, "bandwidth_hz", c.bandwidth_hz);
  read_opt(j, "samples_per_chirp", c.samples_per_chirp);
  read_opt(j, "chirps_per_frame", c.chirps_per_frame);
  read_opt(j, "frame_period_s", c.frame_period_s);
  read_opt(j, "chirp_cycle_time_s", c.chirp_cycle_time_s);
  read_opt(j, "adc_rate_hz", c.adc_rate_hz);
  c.validate();
  return c;
}

json persona_json(const PersonaProfile& p) {
  json j;
  j["id_label"] = p.id_label;
  j["resp_rate_hz"] = p.resp_rate_hz;
  j["resp_amplitude_m"] = p.resp_amplitude_m;
  json h = json::array();
  for (const auto& t : p.harmonics)
    h.push_back({{"order", t.order}, {"ratio", t.ratio}, {"phase_rad", t.phase_rad}});
  j["harmonics"] = h;
  j["inhale_exhale_ratio"] = p.inhale_exhale_ratio;
  j["heart_rate_hz"] = p.heart_rate_hz;
  j["heart_amplitude_m"] = p.heart_amplitude_m;
  j["micromotion_std_m"] = p.micromotion_std_m;
  j["base_range_m"] = p.base_range_m;
  j["rate_jitter"] = p.rate_jitter;
  j["amplitude_jitter"] = p.amplitude_jitter;
  return j;
}

PersonaProfile parse_persona(const json& j) {
  if (!j.is_object()) format_error("persona must be an object");
  PersonaProfile p;
  read_opt(j, "id_label", p.id_label);
  read_opt(j, "resp_rate_hz", p.resp_rate_hz);
  read_opt(j, "resp_amplitude_m", p.resp_amplitude_m);
  if (j.contains("harmonics")) {
    if (!j.at("harmonics").is_array()) format_error("harmonics must be an array");
    for (const auto& h : j.at("harmonics")) {
      HarmonicTerm t;
      t.order = get_field<int>(h, "order");
      t.ratio = get_field<double>(h, "ratio");
      read_opt(h, "phase_rad", t.phase_rad);
      p.harmonics.push_back(t);
    }
  }
  read_opt(j, "inhale_exhale_ratio", p.inhale_exhale_ratio);
  read_opt(j, "heart_rate_hz", p.heart_rate_hz);
  read_opt(j, "heart_amplitude_m", p.heart_amplitude_m);
  read_opt(j, "micromotion_std_m", p.micromotion_std_m);
  read_opt(j, "base_range_m", p.base_range_m);
  read_opt(j, "rate_jitter", p.rate_jitter);
  read_opt(j, "amplitude_jitter", p.amplitude_jitter);
  p.validate();
  return p;
}

json afd_json(const AfdConfig& c) {
  json j;
  j["band_hz"] = band_json(c.band);
  j["filter_order"] = c.filter_order;
  j["K"] = c.vmd.K;
  j["penalty_alpha"] = c.vmd.penalty_alpha;
  j["tau"] = c.vmd.tau;
  j["tol"] = c.vmd.tol;
  j["max_iters"] = c.vmd.max_iters;
  j["init"] = c.vmd.init == VmdInit::Uniform ? "uniform" : "zero";
  return j;
}

AfdConfig parse_afd(const json& j) {
  AfdConfig c;
  if (j.contains("band_hz")) c.band = parse_band(j.at("band_hz"));
  read_opt(j, "filter_order", c.filter_order);
  read_opt(j, "K", c.vmd.K);
  read_opt(j, "penalty_alpha", c.vmd.penalty_alpha);
  read_opt(j, "tau", c.vmd.tau);
  read_opt(j, "tol", c.vmd.tol);
  read_opt(j, "max_iters", c.vmd.max_iters);
  if (j.contains("init")) {
    const auto s = get_field<std::string>(j, "init");
    if (s == "uniform") c.vmd.init = VmdInit::Uniform;
    else if (s == "zero") c.vmd.init = VmdInit::Zero;
    else format_error("unknown VMD init '" + s + "'");
  }
  c.vmd.validate();
  return c;
}

}  // namespace

void write_file_atomic(const std::string& path, std::string_view bytes) {
  namespace fs = std::filesystem;
  require(!path.empty(), "output path is empty");
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".partial";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorCode::Io, "cannot open '" + path + "' for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.flush();
    if (!f) {
      f.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      fail(ErrorCode::Io, "write to '" + path + "' failed");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorCode::Io, "cannot move output into '" + path + "'");
  }
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  if (f.bad()) fail(ErrorCode::Io, "read from '" + path + "' failed");
  return ss.str();
}

RadarConfig radar_config_from_json(const std::string& text) {
  return parse_radar(parse_json(text, "radar config"));
}
std::string radar_config_to_json(const RadarConfig& config) { return radar_json(config).dump(2); }
PersonaProfile persona_from_json(const std::string& text) {
  return parse_persona(parse_json(text, "persona"));
}
std::string persona_to_json(const PersonaProfile& persona) { return persona_json(persona).dump(2); }

std::string cohort_config_to_json(const CohortConfig& c) {
  json j;
  j["personas"] = c.personas;
  j["sessions"] = c.sessions;
  j["session_s"] = c.session_s;
  j["window_s"] = c.window_s;
  j["overlap"] = c.overlap;
  j["distance_m"] = c.distance_m;
  j["pattern"] = pattern_name(c.pattern);
  j["ref_snr_db"] = c.ref_snr_db;
  j["ref_distance_m"] = c.ref_distance_m;
  j["session_rate_jitter"] = c.session_rate_jitter;
  j["session_amp_jitter"] = c.session_amp_jitter;
  j["test_fraction"] = c.test_fraction;
  j["seed"] = c.seed;
  j["radar"] = radar_json(c.radar);
  j["afd"] = afd_json(c.afd);
  return j.dump(2);
}

CohortConfig cohort_config_from_json(const std::string& text) {
  const json j = parse_json(text, "cohort config");
  if (!j.is_object()) format_error("cohort config must be an object");
  CohortConfig c;
  read_opt(j, "personas", c.personas);
  read_opt(j, "sessions", c.sessions);
  read_opt(j, "session_s", c.session_s);
  read_opt(j, "window_s", c.window_s);
  read_opt(j, "overlap", c.overlap);
  read_opt(j, "distance_m", c.distance_m);
  if (j.contains("pattern")) {
    try {
      c.pattern = parse_pattern(get_field<std::string>(j, "pattern"));
    } catch (const Error& e) {
      format_error(e.what());
    }
  }
  read_opt(j, "ref_snr_db", c.ref_snr_db);
  read_opt(j, "ref_distance_m", c.ref_distance_m);
  read_opt(j, "session_rate_jitter", c.session_rate_jitter);
  read_opt(j, "session_amp_jitter", c.session_amp_jitter);
  read_opt(j, "test_fraction", c.test_fraction);
  read_opt(j, "seed", c.seed);
  if (j.contains("radar")) c.radar = parse_radar(j.at("radar"));
  if (j.contains("afd")) c.afd = parse_afd(j.at("afd"));
  c.validate();
  return c;
}

void write_cube(const std::string& path, const RadarCube& cube) {
  cube.validate();
  json side;
  side["format"] = "trurm.cube";
  side["version"] = kFormatVersion;
  side["config"] = radar_json(cube.config);
  side["frames"] = cube.frames;
  side["payload"] = "interleaved float32 I/Q, little endian, (frame, chirp, sample)";
  if (cube.truth) {
    side["truth"] = {{"id_label", cube.truth->id_label},
                     {"displacement_m", cube.truth->displacement_m},
                     {"resp_rate_hz", cube.truth->resp_rate_hz}};
  } else {
    side["truth"] = nullptr;
  }
  std::string payload;
  payload.reserve(cube.iq.size() * 8);
  for (const auto& v : cube.iq) {
    append_le(payload, v.real());
    append_le(payload, v.imag());
  }
  write_file_atomic(path, payload);
  try {
    write_file_atomic(path + ".json", side.dump(2));
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(path, ec);
    throw;
  }
}

RadarCube read_cube(const std::string& path) {
  const json side = parse_json(read_file(path + ".json"), "cube sidecar");
  if (!side.is_object() || side.value("format", "") != "trurm.cube")
    format_error("'" + path + ".json' is not a cube sidecar");
  RadarCube cube;
  cube.config = parse_radar(side.at("config"));
  cube.frames = get_field<std::size_t>(side, "frames");
  const std::string payload = read_file(path);
  const std::size_t n = cube.frames * cube.config.chirps_per_frame * cube.config.samples_per_chirp;
  if (payload.size() != n * 8) format_error("cube payload size does not match the sidecar");
  cube.iq.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    cube.iq[i] = {read_le<float>(payload.data() + i * 8), read_le<float>(payload.data() + i * 8 + 4)};
  if (side.contains("truth") && !side.at("truth").is_null()) {
    const json& t = side.at("truth");
    GroundTruth g;
    g.id_label = get_field<int>(t, "id_label");
    g.displacement_m = get_field<Series>(t, "displacement_m");
    g.resp_rate_hz = get_field<Series>(t, "resp_rate_hz");
    cube.truth = std::move(g);
  }
  cube.validate();
  return cube;
}

void write_segments(const std::string& path, const std::vector<PhaseSegment>& segments) {
  json header;
  header["format"] = "trurm.segments";
  header["version"] = kFormatVersion;
  json list = json::array();
  std::string payload;
  for (const auto& s : segments) {
    json m = segment_meta(s);
    m["length"] = s.phase.size();
    list.push_back(std::move(m));
    append_series(payload, s.phase);
  }
  header["segments"] = std::move(list);
  write_file_atomic(path, with_header(header, payload));
}

std::vector<PhaseSegment> read_segments(const std::string& path) {
  const std::string bytes = read_file(path);
  auto [header, offset] = split_header(bytes, "trurm.segments");
  Payload payload(bytes, offset);
  std::vector<PhaseSegment> out;
  for (const auto& m : get_field<json>(header, "segments")) {
    PhaseSegment s = parse_segment_meta(m);
    s.phase = payload.take(get_field<std::size_t>(m, "length"));
    out.push_back(std::move(s));
  }
  payload.finish();
  return out;
}

void write_decompositions(const std::string& path, const std::vector<CohortSample>& samples,
                          const AfdConfig& config) {
  json header;
  header["format"] = "trurm.decomposition";
  header["version"] = kFormatVersion;
  header["params"] = afd_json(config);
  json list = json::array();
  std::string payload;
  for (const auto& s : samples) {
    const DecomposedSignal& d = s.decomposition;
    json m = segment_meta(s.segment);
    m["length"] = d.size();
    m["session"] = s.session;
    m["test"] = s.test;
    m["ure_mode"] = d.ure_mode;
    m["vmd_converged"] = d.vmd_converged;
    json centers = json::array();
    for (const auto& mode : d.modes) centers.push_back(mode.center_hz);
    m["center_hz"] = std::move(centers);
    list.push_back(std::move(m));
    append_series(payload, d.x_ure);
    append_series(payload, d.x_pd);
    append_series(payload, d.x_ot);
    for (const auto& mode : d.modes) append_series(payload, mode.u);
  }
  header["segments"] = std::move(list);
  write_file_atomic(path, with_header(header, payload));
}

std::vector<CohortSample> read_decompositions(const std::string& path, AfdConfig* config) {
  const std::string bytes = read_file(path);
  auto [header, offset] = split_header(bytes, "trurm.decomposition");
  if (config) *config = parse_afd(get_field<json>(header, "params"));
  Payload payload(bytes, offset);
  std::vector<CohortSample> out;
  for (const auto& m : get_field<json>(header, "segments")) {
    CohortSample s;
    s.segment = parse_segment_meta(m);
    read_opt(m, "session", s.session);
    read_opt(m, "test", s.test);
    const auto n = get_field<std::size_t>(m, "length");
    DecomposedSignal& d = s.decomposition;
    d.sample_rate = s.segment.sample_rate;
    d.ure_mode = get_field<std::size_t>(m, "ure_mode");
    read_opt(m, "vmd_converged", d.vmd_converged);
    d.x_ure = payload.take(n);
    d.x_pd = payload.take(n);
    d.x_ot = payload.take(n);
    for (double c : get_field<Series>(m, "center_hz")) d.modes.push_back({payload.take(n), c});
    if (!d.modes.empty() && d.ure_mode >= d.modes.size()) format_error("ure_mode out of range");
    out.push_back(std::move(s));
  }
  payload.finish();
  return out;
}

void write_encrypted(const std::string& path, const std::vector<EncryptedRecord>& records,
                     const PerturbationParams& params) {
  json header;
  header["format"] = "trurm.encrypted";
  header["version"] = kFormatVersion;
  header["beta_amp"] = params.beta_amp;
  header["beta_phase"] = params.beta_phase;
  header["epsilon"] = params.epsilon_margin;
  header["key_length"] = records.empty() ? 0 : records.front().enc.key_length;
  header["key_fingerprint"] = records.empty() ? "" : records.front().enc.key_fingerprint;
  json list = json::array();
  std::string payload;
  for (const auto& r : records) {
    json m = segment_meta(r.meta);
    m["sample_rate"] = r.enc.sample_rate;
    m["length"] = r.enc.size();
    m["test"] = r.test;
    m["alpha_f"] = r.enc.alpha_f;
    m["gamma_f"] = r.enc.gamma_f;
    m["dtw_score"] = r.enc.dtw_score;
    m["t_res_s"] = r.enc.t_res;
    list.push_back(std::move(m));
    append_series(payload, r.enc.y);
  }
  header["segments"] = std::move(list);
  write_file_atomic(path, with_header(header, payload));
}

std::vector<EncryptedRecord> read_encrypted(const std::string& path) {
  const std::string bytes = read_file(path);
  auto [header, offset] = split_header(bytes, "trurm.encrypted");
  const auto L = get_field<std::size_t>(header, "key_length");
  const auto eps = get_field<std::size_t>(header, "epsilon");
  const auto fp = get_field<std::string>(header, "key_fingerprint");
  Payload payload(bytes, offset);
  std::vector<EncryptedRecord> out;
  for (const auto& m : get_field<json>(header, "segments")) {
    EncryptedRecord r;
    r.meta = parse_segment_meta(m);
    read_opt(m, "test", r.test);
    r.enc.key_length = L;
    r.enc.epsilon_margin = eps;
    r.enc.key_fingerprint = fp;
    r.enc.sample_rate = r.meta.sample_rate;
    r.enc.alpha_f = get_field<double>(m, "alpha_f");
    r.enc.gamma_f = get_field<double>(m, "gamma_f");
    r.enc.dtw_score = get_field<double>(m, "dtw_score");
    read_opt(m, "t_res_s", r.enc.t_res);
    r.enc.y = payload.take(get_field<std::size_t>(m, "length"));
    out.push_back(std::move(r));
  }
  payload.finish();
  return out;
}

std::vector<LabeledSeries> read_series_file(const std::string& path) {
  const std::string bytes = read_file(path);
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) format_error("'" + path + "' has no header line");
  const std::string format = parse_json(bytes.substr(0, nl), "header").value("format", "");
  std::vector<LabeledSeries> out;
  auto from_meta = [](const PhaseSegment& m) {
    LabeledSeries s;
    s.sample_rate = m.sample_rate;
    s.start_time = m.start_time;
    s.segment_index = m.segment_index;
    s.label = m.label;
    s.truth_bpm = m.truth_bpm;
    return s;
  };
  if (format == "trurm.segments") {
    for (auto& seg : read_segments(path)) {
      LabeledSeries s = from_meta(seg);
      s.y = std::move(seg.phase);
      out.push_back(std::move(s));
    }
  } else if (format == "trurm.decomposition") {
    for (const auto& c : read_decompositions(path)) {
      LabeledSeries s = from_meta(c.segment);
      s.y = c.decomposition.recombined();
      s.test = c.test;
      out.push_back(std::move(s));
    }
  } else if (format == "trurm.encrypted") {
    for (auto& r : read_encrypted(path)) {
      LabeledSeries s = from_meta(r.meta);
      s.y = std::move(r.enc.y);
      s.test = r.test;
      out.push_back(std::move(s));
    }
  } else {
    format_error("'" + path + "' is not a segment, decomposition or encrypted file");
  }
  return out;
}

std::string ptn_params_to_json(const PtnParams& p) {
  json j;
  j["format"] = "trurm.ptn";
  j["version"] = kFormatVersion;
  j["theta_b"] = p.theta_b;
  j["stft"] = {{"window", p.stft.window}, {"hop", p.stft.hop}, {"fft_size", p.stft.fft_size}};
  j["band_hz"] = band_json(p.band);
  j["nu_scale"] = p.nu_scale;
  j["sdab_enabled"] = p.sdab_enabled;
  json layers = json::array();
  for (const auto& l : p.tmb.layers) {
    json conv_w = json::array();
    for (const auto& row : l.conv_w) conv_w.push_back(row);
    layers.push_back({{"conv_w", conv_w},
                      {"conv_b", l.conv_b},
                      {"running_mean", l.running_mean},
                      {"running_var", l.running_var},
                      {"mix_w", l.mix_w},
                      {"mix_b", l.mix_b},
                      {"residual_scale", l.residual_scale}});
  }
  j["tmb_layers"] = std::move(layers);
  return j.dump(2);
}

PtnParams ptn_params_from_json(const std::string& text) {
  const json j = parse_json(text, "PTN parameters");
  if (!j.is_object() || j.value("format", "") != "trurm.ptn") format_error("not a PTN parameter file");
  PtnParams p;
  read_opt(j, "theta_b", p.theta_b);
  if (j.contains("stft")) {
    const json& s = j.at("stft");
    p.stft.window = get_field<std::size_t>(s, "window");
    p.stft.hop = get_field<std::size_t>(s, "hop");
    p.stft.fft_size = get_field<std::size_t>(s, "fft_size");
  }
  if (j.contains("band_hz")) p.band = parse_band(j.at("band_hz"));
  read_opt(j, "nu_scale", p.nu_scale);
  read_opt(j, "sdab_enabled", p.sdab_enabled);
  if (j.contains("tmb_layers")) {
    for (const auto& lj : j.at("tmb_layers")) {
      TmbLayer l;
      const auto conv_w = get_field<std::vector<std::vector<double>>>(lj, "conv_w");
      if (conv_w.size() != TmbLayer::kChannels) format_error("conv_w must have 8 rows");
      for (std::size_t c = 0; c < TmbLayer::kChannels; ++c) {
        if (conv_w[c].size() != TmbLayer::kKernel) format_error("conv_w rows must have 5 taps");
        std::copy(conv_w[c].begin(), conv_w[c].end(), l.conv_w[c].begin());
      }
      l.conv_b = get_field<decltype(l.conv_b)>(lj, "conv_b");
      l.running_mean = get_field<decltype(l.running_mean)>(lj, "running_mean");
      l.running_var = get_field<decltype(l.running_var)>(lj, "running_var");
      l.mix_w = get_field<decltype(l.mix_w)>(lj, "mix_w");
      l.mix_b = get_field<double>(lj, "mix_b");
      l.residual_scale = get_field<double>(lj, "residual_scale");
      p.tmb.layers.push_back(l);
    }
  }
  try {
    p.stft.validate();
  } catch (const Error& e) {
    format_error(e.what());
  }
  return p;
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string rates_to_csv(const std::vector<RateRow>& rows) {
  std::string out = "segment_index,start_time_s,rate_bpm,truth_bpm,peak_prominence\n";
  for (const auto& r : rows) {
    out += std::to_string(r.segment_index) + "," + fixed(r.start_time_s, 4) + "," +
           fixed(r.rate_bpm, 4) + "," + (r.truth_bpm ? fixed(*r.truth_bpm, 4) : "") + "," +
           fixed(r.peak_prominence, 4) + "\n";
  }
  return out;
}

std::vector<RateRow> rates_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      line != "segment_index,start_time_s,rate_bpm,truth_bpm,peak_prominence")
    format_error("rates CSV header mismatch");
  std::vector<RateRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() != 5) format_error("rates CSV row must have 5 columns");
    try {
      RateRow r;
      r.segment_index = std::stoul(cells[0]);
      r.start_time_s = std::stod(cells[1]);
      r.rate_bpm = std::stod(cells[2]);
      if (!cells[3].empty()) r.truth_bpm = std::stod(cells[3]);
      r.peak_prominence = std::stod(cells[4]);
      rows.push_back(r);
    } catch (const std::logic_error&) {
      format_error("rates CSV: malformed number in '" + line + "'");
    }
  }
  return rows;
}

std::string attack_report_to_json(const AttackReport& r) {
  json j;
  j["format"] = "trurm.attack";
  j["version"] = kFormatVersion;
  j["irac"] = r.irac;
  j["class_labels"] = r.class_labels;
  j["per_class_accuracy"] = r.per_class_accuracy;
  j["confusion"] = r.confusion;
  j["confusion_axes"] = {{"rows", "truth"}, {"columns", "prediction"}};
  j["predictions"] = r.predictions;
  return j.dump(2);
}

AttackReport attack_report_from_json(const std::string& text) {
  const json j = parse_json(text, "attack report");
  if (!j.is_object() || j.value("format", "") != "trurm.attack") format_error("not an attack report");
  AttackReport r;
  r.irac = get_field<double>(j, "irac");
  r.class_labels = get_field<std::vector<int>>(j, "class_labels");
  r.per_class_accuracy = get_field<Series>(j, "per_class_accuracy");
  r.confusion = get_field<std::vector<std::vector<std::size_t>>>(j, "confusion");
  read_opt(j, "predictions", r.predictions);
  return r;
}

EncryptionKey read_key_file(const std::string& path) {
  std::string text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  const auto last = text.find_last_not_of(" \t\r\n");
  if (first == std::string::npos) format_error("key file is empty");
  return EncryptionKey::from_hex(std::string_view(text).substr(first, last - first + 1));
}

}  // namespace trurm
