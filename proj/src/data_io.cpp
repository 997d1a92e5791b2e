#include "gcnlab/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

#include <openssl/evp.h>

#include "json.hpp"

namespace gcnlab {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return std::move(ss).str();
}

void write_file(const fs::path& path, std::string_view text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw LoadError("cannot write " + path.string());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!os) throw LoadError("failed writing " + path.string());
}

// Splits on '\n'; a trailing newline does not produce an empty last line.
std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

template <typename T>
T parse_number(std::string_view token, const fs::path& file, std::size_t line_no) {
  while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) token.remove_prefix(1);
  while (!token.empty() && (token.back() == ' ' || token.back() == '\t')) token.remove_suffix(1);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  T value{};
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    throw LoadError(file.filename().string() + ":" + std::to_string(line_no + 1) +
                    ": cannot parse '" + std::string(token) + "'");
  }
  return value;
}

std::vector<Index> read_index_list(const fs::path& path, Index n) {
  const std::string text = read_file(path);
  std::vector<Index> out;
  const auto lines = lines_of(text);
  for (std::size_t k = 0; k < lines.size(); ++k) {
    if (lines[k].empty()) continue;
    const auto v = parse_number<Index>(lines[k], path, k);
    if (v < 0 || v >= n) {
      throw LoadError(path.filename().string() + ":" + std::to_string(k + 1) + ": index " +
                      std::to_string(v) + " out of range [0, " + std::to_string(n) + ")");
    }
    out.push_back(v);
  }
  return out;
}

std::string index_list_text(const std::vector<Index>& values) {
  std::string out;
  for (Index v : values) {
    out += std::to_string(v);
    out += '\n';
  }
  return out;
}

void append_double(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

BundleFile file_entry(const nlohmann::json& files, const char* key) {
  const auto& f = files.at(key);
  return {f.at("path").get<std::string>(), f.at("sha256").get<std::string>()};
}

std::string verified_contents(const fs::path& dir, const BundleFile& entry) {
  const fs::path path = dir / entry.path;
  if (!fs::exists(path)) throw LoadError("bundle file missing: " + path.string());
  std::string text = read_file(path);
  const std::string digest = sha256_hex(text);
  if (digest != entry.sha256) {
    throw LoadError("checksum mismatch for " + path.string() + ": manifest " + entry.sha256 +
                    ", file " + digest);
  }
  return text;
}

}  // namespace

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

BundleManifest read_manifest(const fs::path& dir) {
  const fs::path path = dir / "manifest.json";
  if (!fs::exists(path)) throw LoadError("no manifest.json in " + dir.string());
  try {
    const auto j = nlohmann::json::parse(read_file(path));
    BundleManifest m;
    m.name = j.at("name").get<std::string>();
    m.num_nodes = j.at("num_nodes").get<Index>();
    m.num_features = j.at("num_features").get<Index>();
    m.num_classes = j.at("num_classes").get<int>();
    m.directed_source = j.value("directed_source", false);
    if (j.contains("num_edges_directed")) m.num_edges_directed = j["num_edges_directed"].get<Index>();
    if (j.contains("num_edges_undirected")) m.num_edges_undirected = j["num_edges_undirected"].get<Index>();
    const auto& files = j.at("files");
    m.edges = file_entry(files, "edges");
    m.features = file_entry(files, "features");
    m.labels = file_entry(files, "labels");
    m.split_train = file_entry(files, "split_train");
    m.split_val = file_entry(files, "split_val");
    m.split_test = file_entry(files, "split_test");
    if (m.num_nodes < 1 || m.num_features < 1 || m.num_classes < 1) {
      throw LoadError("manifest counts must be positive");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("malformed manifest " + path.string() + ": " + e.what());
  }
}

GraphBundle load_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw LoadError("dataset directory not found: " + dir.string());
  const BundleManifest m = read_manifest(dir);
  const Index n = m.num_nodes;

  std::vector<Edge> edges;
  {
    const fs::path path = dir / m.edges.path;
    const std::string text = verified_contents(dir, m.edges);
    const auto lines = lines_of(text);
    edges.reserve(lines.size());
    for (std::size_t k = 0; k < lines.size(); ++k) {
      if (lines[k].empty()) continue;
      const auto tab = lines[k].find('\t');
      if (tab == std::string_view::npos) {
        throw LoadError(path.filename().string() + ":" + std::to_string(k + 1) +
                        ": expected two tab-separated indices");
      }
      const auto a = parse_number<Index>(lines[k].substr(0, tab), path, k);
      const auto b = parse_number<Index>(lines[k].substr(tab + 1), path, k);
      if (a < 0 || a >= n || b < 0 || b >= n) {
        throw LoadError(path.filename().string() + ":" + std::to_string(k + 1) + ": edge (" +
                        std::to_string(a) + ", " + std::to_string(b) + ") out of range");
      }
      edges.emplace_back(a, b);
    }
  }

  Matrix features(m.num_features, n);
  {
    const fs::path path = dir / m.features.path;
    const std::string text = verified_contents(dir, m.features);
    const auto lines = lines_of(text);
    Index row = 0;
    for (std::size_t k = 0; k < lines.size(); ++k) {
      if (lines[k].empty()) continue;
      if (row >= n) throw LoadError(path.string() + ": more feature rows than nodes");
      Index col = 0;
      std::string_view rest = lines[k];
      while (true) {
        const auto comma = rest.find(',');
        if (col >= m.num_features) {
          throw LoadError(path.filename().string() + ":" + std::to_string(k + 1) +
                          ": more than " + std::to_string(m.num_features) + " columns");
        }
        features(col++, row) = parse_number<double>(rest.substr(0, comma), path, k);
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
      }
      if (col != m.num_features) {
        throw LoadError(path.filename().string() + ":" + std::to_string(k + 1) + ": " +
                        std::to_string(col) + " columns, manifest says " +
                        std::to_string(m.num_features));
      }
      ++row;
    }
    if (row != n) {
      throw LoadError(path.string() + ": " + std::to_string(row) + " feature rows, manifest says " +
                      std::to_string(n));
    }
  }

  std::vector<int> labels;
  {
    const fs::path path = dir / m.labels.path;
    const std::string text = verified_contents(dir, m.labels);
    const auto lines = lines_of(text);
    for (std::size_t k = 0; k < lines.size(); ++k) {
      if (lines[k].empty()) continue;
      const int y = parse_number<int>(lines[k], path, k);
      if (y < 0 || y >= m.num_classes) {
        throw LoadError(path.filename().string() + ":" + std::to_string(k + 1) + ": label " +
                        std::to_string(y) + " outside [0, " + std::to_string(m.num_classes) + ")");
      }
      labels.push_back(y);
    }
    if (static_cast<Index>(labels.size()) != n) {
      throw LoadError(path.string() + ": " + std::to_string(labels.size()) +
                      " labels, manifest says " + std::to_string(n));
    }
  }

  Splits splits;
  for (auto [entry, target] : {std::pair{&m.split_train, &splits.train},
                               std::pair{&m.split_val, &splits.val},
                               std::pair{&m.split_test, &splits.test}}) {
    verified_contents(dir, *entry);
    *target = read_index_list(dir / entry->path, n);
  }

  try {
    return GraphBundle::from_edges(n, edges, std::move(features), std::move(labels),
                                   std::move(splits), m.num_classes);
  } catch (const std::invalid_argument& e) {
    throw LoadError("invalid bundle " + dir.string() + ": " + e.what());
  }
}

BundleManifest save_bundle(const GraphBundle& graph, const fs::path& dir,
                           std::string_view name, bool directed_source) {
  fs::create_directories(dir);
  BundleManifest m;
  m.name = std::string(name);
  m.num_nodes = graph.num_nodes();
  m.num_features = graph.num_features();
  m.num_classes = graph.num_classes();
  m.directed_source = directed_source;
  m.num_edges_directed = graph.num_directed_edges();
  m.num_edges_undirected = graph.num_undirected_edges();

  auto emit = [&](const char* filename, const std::string& text) {
    write_file(dir / filename, text);
    return BundleFile{filename, sha256_hex(text)};
  };

  std::string edges;
  for (const auto& [a, b] : graph.edge_list()) {
    edges += std::to_string(a);
    edges += '\t';
    edges += std::to_string(b);
    edges += '\n';
  }
  m.edges = emit("edges.tsv", edges);

  std::string features;
  const Matrix& x = graph.features();
  for (Index i = 0; i < x.cols(); ++i) {
    for (Index c = 0; c < x.rows(); ++c) {
      if (c > 0) features += ',';
      append_double(features, x(c, i));
    }
    features += '\n';
  }
  m.features = emit("features.csv", features);

  std::string labels;
  for (int y : graph.labels()) {
    labels += std::to_string(y);
    labels += '\n';
  }
  m.labels = emit("labels.txt", labels);
  m.split_train = emit("split_train.txt", index_list_text(graph.splits().train));
  m.split_val = emit("split_val.txt", index_list_text(graph.splits().val));
  m.split_test = emit("split_test.txt", index_list_text(graph.splits().test));

  auto file_json = [](const BundleFile& f) {
    return nlohmann::json{{"path", f.path}, {"sha256", f.sha256}};
  };
  nlohmann::json j = {{"name", m.name},
                      {"num_nodes", m.num_nodes},
                      {"num_features", m.num_features},
                      {"num_classes", m.num_classes},
                      {"directed_source", m.directed_source},
                      {"num_edges_directed", *m.num_edges_directed},
                      {"num_edges_undirected", *m.num_edges_undirected},
                      {"files",
                       {{"edges", file_json(m.edges)},
                        {"features", file_json(m.features)},
                        {"labels", file_json(m.labels)},
                        {"split_train", file_json(m.split_train)},
                        {"split_val", file_json(m.split_val)},
                        {"split_test", file_json(m.split_test)}}}};
  write_file(dir / "manifest.json", j.dump(2) + "\n");
  return m;
}

std::optional<SyntheticKind> parse_synthetic_kind(std::string_view name) {
  if (name == "ring") return SyntheticKind::ring;
  if (name == "path") return SyntheticKind::path;
  if (name == "star") return SyntheticKind::star;
  if (name == "er" || name == "erdos_renyi") return SyntheticKind::erdos_renyi;
  if (name == "sbm" || name == "stochastic_block") return SyntheticKind::stochastic_block;
  return std::nullopt;
}

GraphBundle generate_synthetic(SyntheticKind kind, const SyntheticParams& params,
                               std::uint64_t seed) {
  const Index n = params.num_nodes;
  if (n < 1) throw ConfigError("synthetic graph needs at least one node");
  auto check_prob = [](double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ConfigError(std::string(what) + " must lie in [0, 1]");
    }
  };
  if (params.num_features < 1) throw ConfigError("synthetic graph needs >= 1 feature");
  check_prob(params.train_fraction, "train fraction");
  check_prob(params.val_fraction, "val fraction");
  if (params.train_fraction + params.val_fraction > 1.0) {
    throw ConfigError("train + val fractions exceed 1");
  }

  Rng rng(seed);
  std::vector<Edge> edges;
  std::vector<int> labels(static_cast<std::size_t>(n));
  int classes = params.num_classes;

  switch (kind) {
    case SyntheticKind::ring:
      if (n == 2) edges.emplace_back(0, 1);
      if (n >= 3) {
        for (Index i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
      }
      break;
    case SyntheticKind::path:
      for (Index i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
      break;
    case SyntheticKind::star:
      for (Index i = 1; i < n; ++i) edges.emplace_back(0, i);
      break;
    case SyntheticKind::erdos_renyi: {
      check_prob(params.edge_prob, "edge probability");
      std::bernoulli_distribution coin(params.edge_prob);
      for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
          if (coin(rng)) edges.emplace_back(i, j);
        }
      }
      break;
    }
    case SyntheticKind::stochastic_block: {
      check_prob(params.p_in, "p_in");
      check_prob(params.p_out, "p_out");
      if (params.num_blocks < 1 || params.num_blocks > n) {
        throw ConfigError("block count must lie in [1, num_nodes]");
      }
      classes = params.num_blocks;
      for (Index i = 0; i < n; ++i) {
        labels[i] = static_cast<int>(i * params.num_blocks / n);
      }
      std::bernoulli_distribution in_coin(params.p_in);
      std::bernoulli_distribution out_coin(params.p_out);
      for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
          if (labels[i] == labels[j] ? in_coin(rng) : out_coin(rng)) edges.emplace_back(i, j);
        }
      }
      break;
    }
  }
  if (classes < 1) throw ConfigError("synthetic graph needs >= 1 class");
  if (kind != SyntheticKind::stochastic_block) {
    for (Index i = 0; i < n; ++i) labels[i] = static_cast<int>(i % classes);
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix centroids(params.num_features, classes);
  for (Index k = 0; k < centroids.size(); ++k) centroids.data()[k] = gauss(rng);
  Matrix features(params.num_features, n);
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < params.num_features; ++c) {
      features(c, i) = params.feature_signal * centroids(c, labels[i]) + gauss(rng);
    }
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto dn = static_cast<double>(n);
  const Index n_train = std::max<Index>(1, static_cast<Index>(params.train_fraction * dn));
  Index n_val = static_cast<Index>(params.val_fraction * dn);
  if (n >= 3) n_val = std::max<Index>(1, n_val);
  n_val = std::min(n_val, n - n_train);
  Splits splits;
  splits.train.assign(order.begin(), order.begin() + n_train);
  splits.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  splits.test.assign(order.begin() + n_train + n_val, order.end());
  for (auto* s : {&splits.train, &splits.val, &splits.test}) std::sort(s->begin(), s->end());

  return GraphBundle::from_edges(n, edges, std::move(features), std::move(labels),
                                 std::move(splits), classes);
}

GraphBundle open_dataset(std::string_view ref) {
  constexpr std::string_view prefix = "synth:";
  if (ref.substr(0, prefix.size()) != prefix) return load_bundle(fs::path(std::string(ref)));

  std::string_view rest = ref.substr(prefix.size());
  const auto colon = rest.find(':');
  if (colon == std::string_view::npos) {
    throw ConfigError("synthetic dataset must look like synth:<kind>:<nodes>[,k=v...]");
  }
  const auto kind = parse_synthetic_kind(rest.substr(0, colon));
  if (!kind) throw ConfigError("unknown synthetic kind '" + std::string(rest.substr(0, colon)) + "'");
  rest.remove_prefix(colon + 1);

  SyntheticParams params;
  std::uint64_t seed = 0;
  const fs::path where(std::string{ref});
  auto next_token = [&rest]() {
    const auto comma = rest.find(',');
    std::string_view tok = rest.substr(0, comma);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    return tok;
  };
  try {
    params.num_nodes = parse_number<Index>(next_token(), where, 0);
    while (!rest.empty()) {
      const std::string_view tok = next_token();
      const auto eq = tok.find('=');
      if (eq == std::string_view::npos) throw ConfigError("expected key=value, got '" + std::string(tok) + "'");
      const std::string_view key = tok.substr(0, eq);
      const std::string_view val = tok.substr(eq + 1);
      auto real = [&] { return parse_number<double>(val, where, 0); };
      auto integer = [&] { return parse_number<Index>(val, where, 0); };
      if (key == "p") params.edge_prob = real();
      else if (key == "blocks") params.num_blocks = static_cast<int>(integer());
      else if (key == "p_in") params.p_in = real();
      else if (key == "p_out") params.p_out = real();
      else if (key == "features") params.num_features = integer();
      else if (key == "classes") params.num_classes = static_cast<int>(integer());
      else if (key == "signal") params.feature_signal = real();
      else if (key == "train") params.train_fraction = real();
      else if (key == "val") params.val_fraction = real();
      else if (key == "seed") seed = parse_number<std::uint64_t>(val, where, 0);
      else throw ConfigError("unknown synthetic parameter '" + std::string(key) + "'");
    }
  } catch (const LoadError& e) {
    throw ConfigError(std::string("bad synthetic dataset spec: ") + e.what());
  }
  return generate_synthetic(*kind, params, seed);
}

}  // namespace gcnlab
