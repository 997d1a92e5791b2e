#include "gcnlab/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace gcnlab {

std::string_view to_string(SkipMode mode) {
  switch (mode) {
    case SkipMode::none: return "none";
    case SkipMode::residual: return "residual";
    case SkipMode::initial: return "initial";
    case SkipMode::jumping: return "jumping";
    case SkipMode::dynamic: return "dynamic";
  }
  return "?";
}

std::optional<SkipMode> parse_skip_mode(std::string_view name) {
  for (auto m : {SkipMode::none, SkipMode::residual, SkipMode::initial,
                 SkipMode::jumping, SkipMode::dynamic}) {
    if (name == to_string(m)) return m;
  }
  return std::nullopt;
}

std::string_view to_string(SkipSource source) {
  return source == SkipSource::first_layer_output ? "first" : "prev";
}

std::optional<SkipSource> parse_skip_source(std::string_view name) {
  if (name == "first") return SkipSource::first_layer_output;
  if (name == "prev") return SkipSource::previous_layer;
  return std::nullopt;
}

void ModelState::validate() const {
  if (weights.empty()) throw DimensionError("model has no layers");
  for (std::size_t l = 1; l < weights.size(); ++l) {
    if (weights[l].cols() != weights[l - 1].rows()) {
      throw DimensionError("layer " + std::to_string(l + 1) + " weight is " +
                           shape_str(weights[l].rows(), weights[l].cols()) +
                           " but previous layer outputs " +
                           std::to_string(weights[l - 1].rows()) + " channels");
    }
  }
  if (!biases.empty()) {
    if (biases.size() != weights.size()) throw DimensionError("bias count != layer count");
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (biases[l].size() != weights[l].rows()) {
        throw DimensionError("bias " + std::to_string(l + 1) + " has wrong length");
      }
    }
  }
  if (skip_flags.size() != weights.size()) {
    throw DimensionError("skip flag count != layer count");
  }
  if (skip_flags.front()) throw DimensionError("first layer cannot take a skip");
}

bool skip_eligible(Index layer, Index num_layers) {
  return layer >= 1 && layer + 1 < num_layers;
}

ModelState build_model(const ModelShape& shape, InitKind kind,
                       const GraphBundle& graph, Rng& rng,
                       const ModelOptions& options) {
  if (shape.num_layers < 1) throw ConfigError("model needs at least one layer");
  if (shape.input_dim < 1 || shape.num_classes < 1 ||
      (shape.num_layers > 1 && shape.hidden_dim < 1)) {
    throw ConfigError("model dimensions must be positive");
  }
  if (options.alpha < 0.0 || options.alpha > 1.0) {
    throw ConfigError("alpha must lie in [0, 1]");
  }
  ModelState model;
  model.skip_mode = options.skip_mode;
  model.alpha = options.alpha;
  model.skip_source = options.skip_source;
  const Index L = shape.num_layers;
  for (Index l = 0; l < L; ++l) {
    const Index in = l == 0 ? shape.input_dim : shape.hidden_dim;
    const Index out = l + 1 == L ? shape.num_classes : shape.hidden_dim;
    model.weights.push_back(initialize(out, in, kind, graph, rng));
  }
  if (options.bias) {
    for (const auto& w : model.weights) model.biases.push_back(Vector::Zero(w.rows()));
  }
  model.skip_flags.assign(static_cast<std::size_t>(L), false);
  if (options.skip_mode != SkipMode::none && options.skip_mode != SkipMode::dynamic) {
    for (Index l = 0; l < L; ++l) model.skip_flags[l] = skip_eligible(l, L);
  }
  return model;
}

ModelState build_model(const ModelShape& shape, const InitScheme& scheme,
                       const GraphBundle& graph, const ModelOptions& options) {
  Rng rng(scheme.seed);
  ModelState model = build_model(shape, scheme.kind, graph, rng, options);
  model.init = scheme;
  return model;
}

Matrix apply_static_skip(SkipMode mode, double alpha, std::span<const Matrix> history,
                         const Matrix& current) {
  auto check = [&](const Matrix& m) {
    if (m.rows() != current.rows() || m.cols() != current.cols()) {
      throw DimensionError("skip source is " + shape_str(m.rows(), m.cols()) +
                           ", layer output is " + shape_str(current.rows(), current.cols()));
    }
  };
  switch (mode) {
    case SkipMode::residual:
    case SkipMode::initial: {
      if (history.empty()) throw DimensionError("no earlier layer output to skip from");
      const Matrix& source = mode == SkipMode::residual ? history.back() : history.front();
      check(source);
      return (1.0 - alpha) * current + alpha * source;
    }
    case SkipMode::jumping: {
      Matrix sum = current;
      for (const auto& h : history) {
        check(h);
        sum += h;
      }
      return sum / static_cast<double>(history.size() + 1);
    }
    default:
      throw ConfigError("apply_static_skip: mode '" + std::string(to_string(mode)) +
                        "' is not a static skip");
  }
}

namespace {

constexpr char kMagic[8] = {'G', 'C', 'N', 'L', 'C', 'K', 'P', '1'};

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char bytes[8];
  if (!is.read(reinterpret_cast<char*>(bytes), 8)) throw LoadError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

void write_row_major(std::ostream& os, const Matrix& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) write_u64(os, std::bit_cast<std::uint64_t>(m(r, c)));
  }
}

void read_row_major(std::istream& is, Matrix& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = std::bit_cast<double>(read_u64(is));
  }
}

}  // namespace

void save_checkpoint(const ModelState& model, const std::filesystem::path& path) {
  model.validate();
  nlohmann::json header;
  header["format"] = "gcnlab-checkpoint";
  header["version"] = 1;
  header["num_layers"] = model.num_layers();
  auto shapes = nlohmann::json::array();
  for (const auto& w : model.weights) shapes.push_back({w.rows(), w.cols()});
  header["shapes"] = shapes;
  header["dims"] = {{"input", model.input_dim()},
                    {"hidden", model.num_layers() > 1 ? model.weights.front().rows() : 0},
                    {"classes", model.output_dim()}};
  header["bias"] = model.has_bias();
  header["skip_mode"] = to_string(model.skip_mode);
  header["skip_source"] = to_string(model.skip_source);
  header["alpha"] = model.alpha;
  header["skip_flags"] = model.skip_flags;
  header["scheme"] = to_string(model.init.kind);
  header["seed"] = model.init.seed;
  header["dtype"] = "float64-le";
  header["layout"] = "row-major";
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw LoadError("cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof kMagic);
  write_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& w : model.weights) write_row_major(os, w);
  for (const auto& b : model.biases) write_row_major(os, b);
  if (!os) throw LoadError("failed writing checkpoint " + path.string());
}

ModelState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw LoadError(path.string() + " is not a gcnlab checkpoint");
  }
  const std::uint64_t len = read_u64(is);
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len))) throw LoadError("checkpoint truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("bad checkpoint header: ") + e.what());
  }

  ModelState model;
  for (const auto& s : header.at("shapes")) {
    Matrix w(s.at(0).get<Index>(), s.at(1).get<Index>());
    read_row_major(is, w);
    model.weights.push_back(std::move(w));
  }
  if (header.at("bias").get<bool>()) {
    for (const auto& w : model.weights) {
      Matrix b(w.rows(), 1);
      read_row_major(is, b);
      model.biases.emplace_back(b.col(0));
    }
  }
  auto mode = parse_skip_mode(header.at("skip_mode").get<std::string>());
  auto source = parse_skip_source(header.at("skip_source").get<std::string>());
  auto kind = parse_init_kind(header.at("scheme").get<std::string>());
  if (!mode || !source || !kind) throw LoadError("checkpoint header has unknown enum value");
  model.skip_mode = *mode;
  model.skip_source = *source;
  model.init = {*kind, header.at("seed").get<std::uint64_t>()};
  model.alpha = header.at("alpha").get<double>();
  model.skip_flags = header.at("skip_flags").get<std::vector<bool>>();
  model.validate();
  return model;
}

}  // namespace gcnlab
