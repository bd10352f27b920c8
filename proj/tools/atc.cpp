// Copyright 2026 the atc authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// atc: calibrate, encode/decode, sweep, and analyze activation compression.
//
// Exit codes: 0 success, 1 I/O failure, 2 validation failure, 3 numeric
// failure.

#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "atc/codec.hpp"
#include "atc/harness.hpp"
#include "atc/tensor.hpp"

namespace {

using nlohmann::json;

struct GlobalOptions {
  std::optional<uint64_t> seed;
  int threads = 1;
  bool as_json = false;
  bool verbose = false;
};

std::string read_text(const std::string& path) {
  auto bytes = atc::read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_text(const std::string& path, const std::string& text) {
  atc::write_file_atomic(path,
                         {reinterpret_cast<const uint8_t*>(text.data()), text.size()});
}

void note(const GlobalOptions& g, const std::string& msg) {
  if (g.verbose) std::fprintf(stderr, "%s\n", msg.c_str());
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

int cmd_calibrate(const GlobalOptions& g, const std::string& chain_path,
                  const std::string& source_path, const std::string& out_path) {
  atc::harness::LayerChainSpec spec = atc::harness::load_chain_spec(chain_path);
  auto batch = atc::harness::tensors_from_source_json(read_text(source_path), g.seed);
  note(g, "calibrating " + std::to_string(spec.layers.size()) + " layers on " +
              std::to_string(batch.size()) + " tensors");
  atc::harness::ChainCalibration calib =
      atc::harness::calibrate_chain(spec, batch, /*progressive=*/true);
  atc::save_profile(calib.profile, out_path);

  json summary;
  summary["profile"] = out_path;
  summary["layers"] = json::array();
  for (size_t l = 0; l < calib.profile.entries.size(); ++l) {
    const auto& e = calib.profile.entries[l];
    json jl;
    jl["layer"] = l;
    jl["n"] = e.n;
    jl["step"] = e.quant.step;
    jl["clip"] = e.quant.clip;
    json top;
    for (size_t i = 0; i < e.transform.spectrum.size() && i < 5; ++i)
      top.push_back(e.transform.spectrum[i]);
    jl["spectrum_top5"] = std::move(top);
    summary["layers"].push_back(std::move(jl));
  }
  std::printf("%s\n", summary.dump(2).c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// encode / decode
// ---------------------------------------------------------------------------

const atc::ProfileEntry& entry_for_layer(const atc::CalibrationProfile& profile, int layer) {
  if (layer < 0 || static_cast<size_t>(layer) >= profile.entries.size())
    atc::throw_validation(atc::Errc::kInvalidArgument,
                          "layer id " + std::to_string(layer) + " outside profile (0.." +
                              std::to_string(profile.entries.size() - 1) + ")");
  return profile.entries[static_cast<size_t>(layer)];
}

int cmd_encode(const GlobalOptions& g, const std::string& tensor_path,
               const std::string& profile_path, int layer, const std::string& out_path) {
  atc::ActivationTensor t = atc::load_tensor(tensor_path);
  atc::CalibrationProfile profile = atc::load_profile(profile_path);
  const atc::ProfileEntry& entry = entry_for_layer(profile, layer);
  atc::CompressedActivation ca = atc::encode_layer(t, entry);
  atc::save_container(ca, out_path);

  const double bits_per_value = atc::measured_rate(ca, false);
  const double with_header = atc::measured_rate(ca, true);
  if (g.as_json) {
    json out{{"stream", out_path},
             {"payload_bits", ca.payload_bits},
             {"header_bits", ca.header_bits},
             {"bits_per_value", bits_per_value},
             {"bits_per_value_with_header", with_header}};
    std::printf("%s\n", out.dump(2).c_str());
  } else {
    std::printf("payload_bits=%llu header_bits=%llu bits/value=%.4f (+header %.4f)\n",
                static_cast<unsigned long long>(ca.payload_bits),
                static_cast<unsigned long long>(ca.header_bits), bits_per_value, with_header);
  }
  return 0;
}

int cmd_decode(const GlobalOptions& g, const std::string& stream_path,
               const std::string& profile_path, int layer, const std::string& out_path,
               const std::string& reference_path) {
  atc::CompressedActivation ca = atc::load_container(stream_path);
  atc::CalibrationProfile profile = atc::load_profile(profile_path);
  const atc::ProfileEntry& entry = entry_for_layer(profile, layer);
  uint64_t payload_bits = 0;
  atc::ActivationTensor t = atc::decode_layer(ca, entry, &payload_bits);
  atc::save_tensor(t, out_path);

  json out{{"tensor", out_path}, {"payload_bits", payload_bits}};
  std::optional<double> mse;
  if (!reference_path.empty()) {
    atc::ActivationTensor ref = atc::load_tensor(reference_path);
    mse = atc::harness::tensor_mse(t, ref);
    out["mse"] = *mse;
  }
  if (g.as_json) {
    std::printf("%s\n", out.dump(2).c_str());
  } else if (mse) {
    std::printf("decoded %ux%ux%u, mse=%.8g\n", t.height, t.width, t.channels, *mse);
  } else {
    std::printf("decoded %ux%ux%u\n", t.height, t.width, t.channels);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepFlags {
  bool no_klt = false;
  bool vlc_only = false;
  bool theoretical_only = false;
  int truncate = -1;
};

int cmd_sweep(const GlobalOptions& g, const std::string& grid_path, const std::string& out_path,
              const SweepFlags& flags) {
  json grid;
  try {
    grid = json::parse(read_text(grid_path));
  } catch (const json::exception& e) {
    atc::throw_validation(atc::Errc::kInvalidArgument, std::string("grid JSON: ") + e.what());
  }

  std::vector<atc::harness::RateDistortionPoint> points;
  try {
    const bool has_steps = grid.contains("steps");
    const bool has_rates = grid.contains("rates");
    if (has_steps == has_rates)
      atc::throw_validation(atc::Errc::kInvalidArgument,
                            "grid needs exactly one of steps[] or rates[]");
    std::vector<double> values =
        (has_steps ? grid.at("steps") : grid.at("rates")).get<std::vector<double>>();
    if (values.empty())
      atc::throw_validation(atc::Errc::kInvalidArgument, "empty sweep grid");

    if (grid.contains("chain")) {
      if (!has_rates)
        atc::throw_validation(atc::Errc::kInvalidArgument, "chain sweeps take rates[]");
      atc::harness::LayerChainSpec spec =
          atc::harness::load_chain_spec(grid.at("chain").get<std::string>());
      for (auto& layer : spec.layers) {
        if (flags.no_klt || flags.vlc_only) layer.codec.use_klt = false;
        if (flags.truncate >= 0) layer.codec.truncate = static_cast<uint32_t>(flags.truncate);
      }
      auto batch =
          atc::harness::tensors_from_source_json(grid.at("source").dump(), g.seed);
      points = atc::harness::rd_sweep_chain(spec, batch, values);
    } else {
      json codec = grid.value("codec", json::object());
      if (!codec.contains("rate") && !codec.contains("step") && !codec.contains("bits"))
        codec["step"] = 1.0;  // replaced per grid point
      atc::LayerCodecConfig base = atc::harness::codec_config_from_json(codec.dump());
      if (flags.no_klt || flags.vlc_only) base.use_klt = false;
      if (flags.truncate >= 0) base.truncate = static_cast<uint32_t>(flags.truncate);
      auto data = atc::harness::tensors_from_source_json(grid.at("source").dump(), g.seed);
      note(g, "sweeping " + std::to_string(values.size()) + " grid points on " +
                  std::to_string(data.size()) + " tensors");
      points = atc::harness::rd_sweep(data, base, values, has_rates, g.threads);
    }
  } catch (const json::exception& e) {
    atc::throw_validation(atc::Errc::kInvalidArgument, std::string("grid JSON: ") + e.what());
  }

  if (flags.theoretical_only) {
    // Theoretical mode reports entropy in both rate columns (no VLC rates).
    for (auto& p : points) p.huffman_bits = p.entropy_bits;
  }

  const bool json_out = g.as_json || out_path.ends_with(".json");
  atc::harness::emit_report(points, json_out ? "json" : "csv", out_path);
  std::printf("%zu points -> %s\n", points.size(), out_path.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// analyze-eigen / report
// ---------------------------------------------------------------------------

int cmd_analyze_eigen(const GlobalOptions& g, const std::string& profile_path,
                      const std::string& out_path, const std::string& spectra_path) {
  atc::CalibrationProfile profile = atc::load_profile(profile_path);
  auto rows = atc::harness::energy_ratio_report(profile);
  if (!spectra_path.empty()) {
    json spectra = json::array();
    for (size_t l = 0; l < profile.entries.size(); ++l)
      spectra.push_back(
          {{"layer", l}, {"spectrum", profile.entries[l].transform.spectrum}});
    write_text(spectra_path, spectra.dump(2) + "\n");
  }
  if (g.as_json) {
    json arr = json::array();
    for (const auto& r : rows)
      arr.push_back({{"layer", r.layer},
                     {"fraction", r.fraction},
                     {"count", r.count},
                     {"ratio", r.ratio}});
    std::printf("%s\n", arr.dump(2).c_str());
  } else {
    std::printf("%-6s %-9s %-6s %s\n", "layer", "fraction", "count", "count/n");
    for (const auto& r : rows)
      std::printf("%-6zu %-9.2f %-6zu %.4f\n", r.layer, r.fraction, r.count, r.ratio);
  }
  if (!out_path.empty()) {
    std::string csv = "layer,fraction,count,ratio\n";
    for (const auto& r : rows)
      csv += std::to_string(r.layer) + "," + std::to_string(r.fraction) + "," +
             std::to_string(r.count) + "," + std::to_string(r.ratio) + "\n";
    write_text(out_path, csv);
  }
  return 0;
}

int cmd_report(const GlobalOptions& g, const std::string& report_path, const std::string& format,
               const std::string& out_path) {
  const std::string text = read_text(report_path);
  std::vector<atc::harness::RateDistortionPoint> points;
  if (report_path.ends_with(".json"))
    points = atc::harness::parse_report_json(text);
  else
    points = atc::harness::parse_report_csv(text);

  if (!out_path.empty()) {
    atc::harness::emit_report(points, format.empty() ? "csv" : format, out_path);
  }
  if (g.as_json) {
    std::printf("%s", atc::harness::report_to_json(points).c_str());
  } else {
    std::printf("%-6s %-12s %-12s %-12s %-12s\n", "layer", "step", "entropy", "huffman", "mse");
    for (const auto& p : points)
      std::printf("%-6lld %-12.5g %-12.5g %-12.5g %-12.5g\n",
                  static_cast<long long>(p.layer), p.step, p.entropy_bits, p.huffman_bits, p.mse);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"activation transform codec"};
  app.require_subcommand(1);

  GlobalOptions g;
  uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "seed override for synthetic sources");
  app.add_option("--threads", g.threads, "worker cap for sweeps")->check(CLI::PositiveNumber);
  app.add_flag("--json", g.as_json, "machine-readable stdout");
  app.add_flag("--verbose", g.verbose, "progress notes on stderr");

  std::string chain_path, source_path, profile_path, tensor_path, stream_path, out_path;
  std::string reference_path, grid_path, report_path, format;
  int layer = 0;
  SweepFlags sweep_flags;

  auto* calibrate = app.add_subcommand("calibrate", "learn a per-layer profile");
  calibrate->add_option("chain", chain_path, "chain spec JSON")->required();
  calibrate->add_option("source", source_path, "data source spec JSON")->required();
  calibrate->add_option("profile", out_path, "output profile path")->required();

  auto* encode = app.add_subcommand("encode", "tensor -> compressed stream");
  encode->add_option("tensor", tensor_path)->required();
  encode->add_option("profile", profile_path)->required();
  encode->add_option("layer", layer)->required();
  encode->add_option("stream", out_path)->required();

  auto* decode = app.add_subcommand("decode", "compressed stream -> tensor");
  decode->add_option("stream", stream_path)->required();
  decode->add_option("profile", profile_path)->required();
  decode->add_option("layer", layer)->required();
  decode->add_option("tensor", out_path)->required();
  decode->add_option("--reference", reference_path, "original tensor for MSE");

  auto* sweep = app.add_subcommand("sweep", "rate-distortion sweep");
  sweep->add_option("grid", grid_path, "sweep grid JSON")->required();
  sweep->add_option("report", out_path, "output report (csv or json)")->required();
  sweep->add_flag("--no-klt", sweep_flags.no_klt, "disable the decorrelating transform");
  sweep->add_flag("--vlc-only", sweep_flags.vlc_only,
                  "entropy coding without the transform (ablation arm)");
  sweep->add_flag("--theoretical-only", sweep_flags.theoretical_only,
                  "report entropy rates instead of measured VLC rates");
  sweep->add_option("--truncate", sweep_flags.truncate, "kept principal components");

  auto* analyze = app.add_subcommand("analyze-eigen", "eigenvalue energy-ratio table");
  analyze->add_option("profile", profile_path)->required();
  analyze->add_option("--out", out_path, "also write the table as CSV");
  std::string spectra_path;
  analyze->add_option("--spectra", spectra_path, "write per-layer spectra as JSON");

  auto* report = app.add_subcommand("report", "inspect or convert a sweep report");
  report->add_option("report", report_path)->required();
  report->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  report->add_option("--out", out_path, "write converted report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (seed_opt->count() > 0) g.seed = seed_value;

  try {
    if (calibrate->parsed()) return cmd_calibrate(g, chain_path, source_path, out_path);
    if (encode->parsed()) return cmd_encode(g, tensor_path, profile_path, layer, out_path);
    if (decode->parsed())
      return cmd_decode(g, stream_path, profile_path, layer, out_path, reference_path);
    if (sweep->parsed()) return cmd_sweep(g, grid_path, out_path, sweep_flags);
    if (analyze->parsed()) return cmd_analyze_eigen(g, profile_path, out_path, spectra_path);
    if (report->parsed()) return cmd_report(g, report_path, format, out_path);
  } catch (const atc::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 3;
  }
  return 2;
}
