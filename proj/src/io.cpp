#include "dynvine/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace dynvine {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

json waic_json(const std::optional<WaicResult>& w) {
  if (!w) return nullptr;
  return {{"waic", w->total}, {"lppd", w->lppd}, {"penalty", w->penalty}};
}

std::string draws_name(int level, std::size_t index) {
  return "edge_" + std::to_string(level) + "_" + std::to_string(index) + ".bin";
}

json edge_json(const VineEdge& e) {
  return {{"tree", e.tree}, {"a", e.a}, {"b", e.b}, {"conditioning", e.conditioning}, {"label", e.label()}};
}

template <typename T>
void write_block(std::ostream& out, const std::vector<T>& v) {
  static_assert(std::endian::native == std::endian::little, "draw files are little-endian");
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

}  // namespace

// --- CSV -------------------------------------------------------------------

DataMatrix parse_csv(std::istream& in, const std::string& source) {
  std::vector<double> values;
  std::size_t cols = 0, rows = 0, line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = trim(line);
    if (body.empty()) continue;
    std::size_t n = 0, pos = 0;
    for (;;) {
      const std::size_t comma = body.find(',', pos);
      const std::string_view field = trim(body.substr(pos, comma == std::string_view::npos ? body.npos : comma - pos));
      double x = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), x);
      if (field.empty() || ec != std::errc() || ptr != field.data() + field.size())
        throw FormatError(source + ": line " + std::to_string(line_no) + ", field " + std::to_string(n + 1) +
                          ": '" + std::string(field) + "' is not a number");
      values.push_back(x);
      ++n;
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (rows == 0) cols = n;
    if (n != cols)
      throw FormatError(source + ": line " + std::to_string(line_no) + " has " + std::to_string(n) +
                        " fields, expected " + std::to_string(cols));
    ++rows;
  }
  if (rows == 0) throw FormatError(source + ": no data");
  DataMatrix m(rows, cols);
  std::copy(values.begin(), values.end(), m.data().begin());
  return m;
}

DataMatrix read_csv(const fs::path& path) {
  auto in = open_in(path);
  return parse_csv(in, path.string());
}

void write_csv(std::ostream& out, const DataMatrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << format_double(m(r, c));
    }
    out << '\n';
  }
}

void write_csv(const fs::path& path, const DataMatrix& m) {
  auto out = open_out(path);
  write_csv(out, m);
  if (!out) throw std::runtime_error("error writing " + path.string());
}

// --- structures and specs ------------------------------------------------------

json structure_to_json(const RVineStructure& s) {
  json trees = json::array();
  for (const auto& tree : s.trees()) {
    json t = json::array();
    for (const VineEdge& e : tree)
      t.push_back({{"a", e.a}, {"b", e.b}, {"conditioning", e.conditioning}, {"left", e.left}, {"right", e.right}});
    trees.push_back(std::move(t));
  }
  return {{"d", s.dim()}, {"trees", std::move(trees)}, {"matrix", format_matrix(s)}};
}

RVineStructure structure_from_json(const json& j) {
  try {
    RVineStructure s(j.at("d").get<int>());
    int level = 1;
    for (const json& t : j.at("trees")) {
      std::vector<VineEdge> edges;
      for (const json& e : t)
        edges.push_back(VineEdge{level, e.at("a").get<int>(), e.at("b").get<int>(),
                                 e.at("conditioning").get<std::vector<int>>(), e.at("left").get<int>(),
                                 e.at("right").get<int>()});
      s.add_tree_unchecked(std::move(edges));
      ++level;
    }
    const ValidationReport rep = validate(s);
    if (!rep) throw FormatError("structure: " + rep.message);
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("structure: ") + e.what());
  }
}

json spec_to_json(const GenerativeSpec& spec) {
  const SpecMatrices m = spec_to_matrices(spec);
  const int d = m.d;
  json structure = json::array(), family = json::array(), mu = json::array(), phi = json::array(),
       sigma = json::array();
  for (int i = 0; i < d; ++i) {
    json srow = json::array(), frow = json::array(), mrow = json::array(), prow = json::array(),
         sgrow = json::array();
    for (int j = 0; j <= i; ++j) srow.push_back(m.structure[i * d + j]);
    for (int j = 0; j < i; ++j) {
      frow.push_back(m.family[i * d + j]);
      mrow.push_back(m.mu[i * d + j]);
      prow.push_back(m.phi[i * d + j]);
      sgrow.push_back(m.sigma[i * d + j]);
    }
    structure.push_back(srow);
    family.push_back(frow);
    mu.push_back(mrow);
    phi.push_back(prow);
    sigma.push_back(sgrow);
  }
  return {{"d", d}, {"structure", structure}, {"family", family}, {"mu", mu}, {"phi", phi}, {"sigma", sigma}};
}

GenerativeSpec spec_from_json(const json& j) {
  try {
    SpecMatrices m;
    m.d = j.at("d").get<int>();
    const int d = m.d;
    if (d < 2) throw FormatError("spec: d must be at least 2");
    m.structure.assign(d * d, 0);
    m.family.assign(d * d, "");
    m.mu.assign(d * d, 0.0);
    m.phi.assign(d * d, 0.0);
    m.sigma.assign(d * d, 0.0);
    auto rows = [&](const char* key, int extra) -> const json& {
      const json& a = j.at(key);
      if (!a.is_array() || static_cast<int>(a.size()) != d)
        throw FormatError(std::string("spec: '") + key + "' must have " + std::to_string(d) + " rows");
      for (int i = 0; i < d; ++i)
        if (!a[i].is_array() || static_cast<int>(a[i].size()) != i + extra)
          throw FormatError(std::string("spec: row ") + std::to_string(i + 1) + " of '" + key + "' must have " +
                            std::to_string(i + extra) + " entries");
      return a;
    };
    const json& st = rows("structure", 1);
    const json& fa = rows("family", 0);
    const json& mu = rows("mu", 0);
    const json& ph = rows("phi", 0);
    const json& sg = rows("sigma", 0);
    for (int i = 0; i < d; ++i) {
      for (int c = 0; c <= i; ++c) m.structure[i * d + c] = st[i][c].get<int>();
      for (int c = 0; c < i; ++c) {
        m.family[i * d + c] = fa[i][c].get<std::string>();
        m.mu[i * d + c] = mu[i][c].get<double>();
        m.phi[i * d + c] = ph[i][c].get<double>();
        m.sigma[i * d + c] = sg[i][c].get<double>();
      }
    }
    return spec_from_matrices(m);
  } catch (const json::exception& e) {
    throw FormatError(std::string("spec: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("spec: ") + e.what());
  }
}

GenerativeSpec read_spec(const fs::path& path) {
  try {
    return spec_from_json(read_json(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// --- config ------------------------------------------------------------------

FitConfig fit_config_from_json(const json& j, FitConfig cfg) {
  static const std::set<std::string> known = {"R",     "k",        "burnin",  "seed",        "families",
                                              "structure_class", "truncate", "se_mult", "threads",
                                              "static_only", "edge_order_seed", "keep_loglik"};
  if (!j.is_object()) throw FormatError("config: expected a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw FormatError("config: unknown key '" + key + "'");
  try {
    SamplerConfig& s = cfg.sampler;
    s.R = get_or(j, "R", s.R);
    s.k = get_or(j, "k", s.k);
    s.burnin = get_or(j, "burnin", s.burnin);
    s.seed = get_or(j, "seed", s.seed);
    if (j.contains("families")) {
      const json& f = j.at("families");
      if (f.is_string()) {
        s.families = parse_family_list(f.get<std::string>());
      } else {
        s.families.clear();
        for (const json& name : f) s.families.push_back(FamilyId::parse(name.get<std::string>()));
        validate_family_set(s.families);
      }
    }
    if (j.contains("structure_class"))
      cfg.structure_class = parse_structure_class(j.at("structure_class").get<std::string>());
    if (j.contains("truncate")) {
      if (j.at("truncate").is_null())
        cfg.truncation_level.reset();
      else
        cfg.truncation_level = j.at("truncate").get<int>();
    }
    cfg.se_multiplier = get_or(j, "se_mult", cfg.se_multiplier);
    cfg.threads = get_or(j, "threads", cfg.threads);
    if (j.contains("static_only")) cfg.allow_dynamic = !j.at("static_only").get<bool>();
    if (j.contains("edge_order_seed")) {
      if (j.at("edge_order_seed").is_null())
        cfg.edge_order_seed.reset();
      else
        cfg.edge_order_seed = j.at("edge_order_seed").get<std::uint64_t>();
    }
    cfg.keep_loglik = get_or(j, "keep_loglik", cfg.keep_loglik);
  } catch (const json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  return cfg;
}

json fit_config_to_json(const FitConfig& cfg) {
  const SamplerConfig& s = cfg.sampler;
  json j = {{"R", s.R},
            {"k", s.k},
            {"burnin", s.burnin},
            {"seed", s.seed},
            {"families", format_family_list(s.families)},
            {"structure_class", to_string(cfg.structure_class)},
            {"truncate", nullptr},
            {"se_mult", cfg.se_multiplier},
            {"threads", cfg.threads},
            {"static_only", !cfg.allow_dynamic},
            {"edge_order_seed", nullptr},
            {"keep_loglik", cfg.keep_loglik}};
  if (cfg.truncation_level) j["truncate"] = *cfg.truncation_level;
  if (cfg.edge_order_seed) j["edge_order_seed"] = *cfg.edge_order_seed;
  return j;
}

json read_json(const fs::path& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("error writing " + path.string());
}

// --- draws -------------------------------------------------------------------

fs::path sidecar_path(const fs::path& bin_path) {
  fs::path p = bin_path;
  return p.replace_extension(".json");
}

void write_draws(const fs::path& bin_path, const EdgeFit& edge) {
  const BivariateDraws& d = edge.draws;
  const std::size_t R = d.size(), W = d.state_width();
  const bool dynamic = d.kind() == SamplerKind::Dynamic;

  std::vector<std::int32_t> fam(d.family_indices().begin(), d.family_indices().end());
  json blocks = json::array();
  std::size_t offset = 0;
  auto add = [&](const char* name, const char* dtype, std::vector<std::size_t> shape, std::size_t bytes) {
    blocks.push_back({{"name", name}, {"dtype", dtype}, {"shape", shape}, {"offset", offset}});
    offset += bytes;
  };
  add("family_index", "int32", {R}, R * 4);
  add("state", "float64", {R, W}, R * W * 8);
  if (dynamic) {
    add("mu", "float64", {R}, R * 8);
    add("phi", "float64", {R}, R * 8);
    add("sigma", "float64", {R}, R * 8);
  }
  const bool with_ll = !d.loglik().empty();
  if (with_ll) add("loglik", "float64", {R, d.T()}, R * d.T() * 8);

  {
    auto out = open_out(bin_path, std::ios::out | std::ios::binary);
    write_block(out, fam);
    write_block(out, d.states());
    if (dynamic) {
      write_block(out, d.mu());
      write_block(out, d.phi());
      write_block(out, d.sigma());
    }
    if (with_ll) write_block(out, d.loglik());
    if (!out) throw std::runtime_error("error writing " + bin_path.string());
  }
  std::vector<std::string> families;
  for (FamilyId f : d.families()) families.push_back(f.name());
  const json side = {{"format", "dynvine-draws"},
                     {"version", 1},
                     {"byte_order", "little"},
                     {"file", bin_path.filename().string()},
                     {"edge", edge_json(edge.edge)},
                     {"type", to_string(edge.type)},
                     {"kind", dynamic ? "dynamic" : "static"},
                     {"families", families},
                     {"R", R},
                     {"T", d.T()},
                     {"seed", edge.seed},
                     {"bytes", offset},
                     {"blocks", blocks}};
  write_json(sidecar_path(bin_path), side);
}

BivariateDraws read_draws(const fs::path& bin_path) {
  const json side = read_json(sidecar_path(bin_path));
  const std::string where = bin_path.string();
  try {
    if (side.at("format") != "dynvine-draws" || side.at("version") != 1)
      throw FormatError(where + ": unsupported draw format");
    const SamplerKind kind = side.at("kind") == "dynamic" ? SamplerKind::Dynamic : SamplerKind::Static;
    FamilySet fams;
    for (const json& f : side.at("families")) fams.push_back(FamilyId::parse(f.get<std::string>()));
    const std::size_t R = side.at("R"), T = side.at("T");
    BivariateDraws d(kind, T, fams);
    const std::size_t W = d.state_width();

    auto in = open_in(bin_path, std::ios::in | std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() != side.at("bytes").get<std::size_t>())
      throw FormatError(where + ": expected " + side.at("bytes").dump() + " bytes, found " +
                        std::to_string(bytes.size()));
    std::map<std::string, std::size_t> offset;
    for (const json& b : side.at("blocks")) offset[b.at("name")] = b.at("offset");
    auto block = [&]<typename T>(const std::string& name, std::size_t n, T) {
      if (!offset.count(name)) throw FormatError(where + ": missing block '" + name + "'");
      const std::size_t off = offset.at(name);
      if (off + n * sizeof(T) > bytes.size()) throw FormatError(where + ": block '" + name + "' out of range");
      std::vector<T> v(n);
      std::memcpy(v.data(), bytes.data() + off, n * sizeof(T));
      return v;
    };
    const auto fam = block("family_index", R, std::int32_t{});
    const auto states = block("state", R * W, 0.0);
    std::vector<double> mu, phi, sigma;
    if (kind == SamplerKind::Dynamic) {
      mu = block("mu", R, 0.0);
      phi = block("phi", R, 0.0);
      sigma = block("sigma", R, 0.0);
    }
    d.reserve(R);
    for (std::size_t r = 0; r < R; ++r) {
      const Ar1Params p = kind == SamplerKind::Dynamic ? Ar1Params{mu[r], phi[r], sigma[r]} : Ar1Params{};
      d.append_raw(fam[r], std::span<const double>(states.data() + r * W, W), p);
    }
    if (offset.count("loglik")) d.set_loglik(block("loglik", R * T, 0.0));
    return d;
  } catch (const json::exception& e) {
    throw FormatError(where + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(where + ": " + e.what());
  }
}

// --- fit directories ---------------------------------------------------------------

json fit_manifest(const VineFitResult& fit, const json& extra) {
  const auto burnin = static_cast<std::size_t>(fit.config.sampler.burnin);
  json edges = json::array();
  for (std::size_t l = 0; l < fit.edges.size(); ++l)
    for (std::size_t i = 0; i < fit.edges[l].size(); ++i) {
      const EdgeFit& e = fit.edges[l][i];
      json freq = json::object();
      if (e.type != DependenceType::Zero) {
        std::vector<std::size_t> count(e.draws.families().size(), 0);
        for (std::size_t r = burnin; r < e.draws.size(); ++r) ++count[e.draws.family_index(r)];
        for (std::size_t f = 0; f < count.size(); ++f) freq[e.draws.families()[f].name()] = count[f];
      }
      edges.push_back({{"level", l + 1},
                       {"index", i},
                       {"edge", edge_json(e.edge)},
                       {"type", to_string(e.type)},
                       {"family_mode", e.type == DependenceType::Zero ? "indep" : family_mode(e.draws, burnin).name()},
                       {"family_frequencies", freq},
                       {"seed", e.seed},
                       {"sweeps_dynamic", e.sweeps_dynamic},
                       {"sweeps_static", e.sweeps_static},
                       {"seconds", e.seconds},
                       {"waic_dynamic", waic_json(e.waic_dyn)},
                       {"waic_static", waic_json(e.waic_stat)},
                       {"draws", e.type == DependenceType::Zero
                                     ? json(nullptr)
                                     : json("draws/" + draws_name(static_cast<int>(l + 1), i))}});
    }
  json m = {{"software", {{"name", kSoftwareName}, {"version", kSoftwareVersion}}},
            {"T", fit.T},
            {"d", fit.structure.dim()},
            {"master_seed", fit.config.sampler.seed},
            {"config", fit_config_to_json(fit.config)},
            {"structure", structure_to_json(fit.structure)},
            {"edges", edges},
            {"tree_seconds", fit.tree_seconds},
            {"warnings", fit.warnings}};
  for (const auto& [k, v] : extra.items()) m[k] = v;
  return m;
}

void write_fit_dir(const fs::path& dir, const VineFitResult& fit, const DataMatrix& train, const json& extra) {
  fs::create_directories(dir / "draws");
  write_json(dir / "manifest.json", fit_manifest(fit, extra));
  write_json(dir / "structure.json", structure_to_json(fit.structure));
  {
    auto out = open_out(dir / "structure.txt");
    out << format_matrix(fit.structure);
  }
  {
    auto out = open_out(dir / "waic.csv");
    out << "level,index,edge,type,waic_dynamic,lppd_dynamic,penalty_dynamic,waic_static,lppd_static,penalty_static\n";
    auto cells = [&](const std::optional<WaicResult>& w) {
      return w ? format_double(w->total) + "," + format_double(w->lppd) + "," + format_double(w->penalty)
               : std::string(",,");
    };
    for (std::size_t l = 0; l < fit.edges.size(); ++l)
      for (std::size_t i = 0; i < fit.edges[l].size(); ++i) {
        const EdgeFit& e = fit.edges[l][i];
        out << l + 1 << ',' << i << ",\"" << e.edge.label() << "\"," << to_string(e.type) << ','
            << cells(e.waic_dyn) << ',' << cells(e.waic_stat) << '\n';
      }
  }
  write_csv(dir / "train.csv", train);
  for (std::size_t l = 0; l < fit.edges.size(); ++l)
    for (std::size_t i = 0; i < fit.edges[l].size(); ++i)
      if (fit.edges[l][i].type != DependenceType::Zero)
        write_draws(dir / "draws" / draws_name(static_cast<int>(l + 1), i), fit.edges[l][i]);
}

LoadedFit read_fit_dir(const fs::path& dir) {
  LoadedFit out;
  out.manifest = read_json(dir / "manifest.json");
  const json& m = out.manifest;
  try {
    VineFitResult& fit = out.fit;
    fit.config = fit_config_from_json(m.at("config"));
    fit.T = m.at("T");
    fit.structure = structure_from_json(m.at("structure"));
    fit.tree_seconds = m.at("tree_seconds").get<std::vector<double>>();
    fit.warnings = m.at("warnings").get<std::vector<std::string>>();
    fit.edges.resize(fit.structure.levels());
    for (int l = 1; l <= fit.structure.levels(); ++l) fit.edges[l - 1].resize(fit.structure.tree(l).size());
    for (const json& e : m.at("edges")) {
      const int level = e.at("level");
      const std::size_t index = e.at("index");
      if (level < 1 || level > fit.structure.levels() || index >= fit.edges[level - 1].size())
        throw FormatError("manifest: edge position out of range");
      EdgeFit& ef = fit.edges[level - 1][index];
      ef.edge = fit.structure.edge(level, index);
      ef.type = parse_dependence_type(e.at("type").get<std::string>());
      ef.seed = e.at("seed");
      ef.sweeps_dynamic = e.at("sweeps_dynamic");
      ef.sweeps_static = e.at("sweeps_static");
      ef.seconds = e.at("seconds");
      auto waic = [](const json& w) -> std::optional<WaicResult> {
        if (w.is_null()) return std::nullopt;
        WaicResult r;
        r.total = w.at("waic");
        r.lppd = w.at("lppd");
        r.penalty = w.at("penalty");
        return r;
      };
      ef.waic_dyn = waic(e.at("waic_dynamic"));
      ef.waic_stat = waic(e.at("waic_static"));
      if (ef.type != DependenceType::Zero) {
        ef.draws = read_draws(dir / e.at("draws").get<std::string>());
        if (ef.draws.T() != fit.T) throw FormatError("manifest: draws of edge " + ef.edge.label() + " have wrong T");
      }
    }
  } catch (const json::exception& e) {
    throw FormatError((dir / "manifest.json").string() + ": " + e.what());
  }
  out.train = read_csv(dir / "train.csv");
  if (out.train.rows() != out.fit.T) throw FormatError((dir / "train.csv").string() + ": row count differs from T");
  return out;
}

}  // namespace dynvine
