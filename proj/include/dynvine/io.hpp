#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dynvine/matrix.hpp"
#include "dynvine/sequential_fit.hpp"
#include "dynvine/simulate_forecast.hpp"

namespace dynvine {

/// Malformed input file. The message names the file and, where it applies,
/// the offending line.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kSoftwareName = "dynvine";
inline constexpr const char* kSoftwareVersion = "0.1.0";

// Headerless CSV matrices. Fields are separated by commas; blank lines are
// skipped. Values are written with 17 significant digits.
DataMatrix parse_csv(std::istream& in, const std::string& source = "<input>");
DataMatrix read_csv(const std::filesystem::path& path);
void write_csv(std::ostream& out, const DataMatrix& m);
void write_csv(const std::filesystem::path& path, const DataMatrix& m);

/// Tree-list form: {"d": d, "trees": [[{"a", "b", "conditioning", "left",
/// "right"}, ...], ...]} with 1-based parent positions.
nlohmann::json structure_to_json(const RVineStructure& s);
RVineStructure structure_from_json(const nlohmann::json& j);

/// Generative spec as lower-triangular matrices: "structure" row i holds
/// i + 1 entries (diagonal included); "family", "mu", "phi" and "sigma" row i
/// hold i entries.
nlohmann::json spec_to_json(const GenerativeSpec& spec);
GenerativeSpec spec_from_json(const nlohmann::json& j);
GenerativeSpec read_spec(const std::filesystem::path& path);

/// Fit configuration keys: R, k, burnin, seed, families (list string or
/// array), structure_class, truncate, se_mult, threads, static_only,
/// edge_order_seed, keep_loglik. Missing keys keep the values of `base`;
/// unknown keys are rejected.
FitConfig fit_config_from_json(const nlohmann::json& j, FitConfig base = {});
nlohmann::json fit_config_to_json(const FitConfig& cfg);
nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// Draws of one edge: flat little-endian binary blocks (family_index as int32,
/// then state, mu, phi, sigma and optionally loglik as float64) plus a JSON
/// sidecar describing the layout.
void write_draws(const std::filesystem::path& bin_path, const EdgeFit& edge);
BivariateDraws read_draws(const std::filesystem::path& bin_path);
std::filesystem::path sidecar_path(const std::filesystem::path& bin_path);

/// Fit directory: manifest.json, structure.json, structure.txt, waic.csv,
/// train.csv and draws/edge_<level>_<index>.{bin,json}.
void write_fit_dir(const std::filesystem::path& dir, const VineFitResult& fit, const DataMatrix& train,
                   const nlohmann::json& extra = nlohmann::json::object());
nlohmann::json fit_manifest(const VineFitResult& fit, const nlohmann::json& extra = nlohmann::json::object());
struct LoadedFit {
  VineFitResult fit;
  DataMatrix train;
  nlohmann::json manifest;
};
LoadedFit read_fit_dir(const std::filesystem::path& dir);

}  // namespace dynvine
