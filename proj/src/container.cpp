#include "servo/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace servo {

using ordered_json = nlohmann::ordered_json;

const char kContainerMagic[9] = "SVKTNSR1";

namespace {

void write_bytes(std::ofstream& out, const void* data, size_t n) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw std::runtime_error("container: write failed");
}

void read_bytes(std::ifstream& in, void* data, size_t n) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (in.gcount() != static_cast<std::streamsize>(n)) throw std::runtime_error("container: truncated file");
}

void write_u64_le(std::ofstream& out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  write_bytes(out, bytes, 8);
}

std::uint64_t read_u64_le(std::ifstream& in) {
  unsigned char bytes[8];
  read_bytes(in, bytes, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

void write_f32_le(std::ofstream& out, const std::vector<float>& data) {
  if constexpr (std::endian::native == std::endian::little) {
    write_bytes(out, data.data(), data.size() * sizeof(float));
  } else {
    for (const float f : data) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      unsigned char bytes[4];
      for (int i = 0; i < 4; ++i) bytes[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
      write_bytes(out, bytes, 4);
    }
  }
}

void read_f32_le(std::ifstream& in, std::vector<float>& data) {
  if constexpr (std::endian::native == std::endian::little) {
    read_bytes(in, data.data(), data.size() * sizeof(float));
  } else {
    for (float& f : data) {
      unsigned char bytes[4];
      read_bytes(in, bytes, 4);
      std::uint32_t bits = 0;
      for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
      std::memcpy(&f, &bits, 4);
    }
  }
}

std::int64_t element_count(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (const std::int64_t d : shape) {
    if (d < 0) throw std::runtime_error("container: negative tensor dimension");
    n *= d;
  }
  return n;
}

ordered_json standardizer_to_json(const Standardizer& s) {
  return ordered_json{{"mean", s.mean}, {"stddev", s.stddev}};
}

Standardizer standardizer_from_json(const nlohmann::json& j) {
  Standardizer s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.stddev = j.at("stddev").get<std::vector<double>>();
  if (s.mean.size() != s.stddev.size()) throw std::runtime_error("container: inconsistent standardizer");
  return s;
}

void check_kind(const nlohmann::json& header, const std::string& kind) {
  if (header.at("kind").get<std::string>() != kind)
    throw std::runtime_error("container: expected a " + kind + " file");
  if (header.at("schema-version").get<int>() != 1)
    throw std::runtime_error("container: unsupported schema version");
}

}  // namespace

void write_container(const std::string& path, const Container& container) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("container: cannot open for writing: " + path);
  write_bytes(out, kContainerMagic, 8);
  write_u64_le(out, container.header_json.size());
  write_bytes(out, container.header_json.data(), container.header_json.size());
  for (const ContainerTensor& t : container.tensors) {
    if (static_cast<std::int64_t>(t.data.size()) != element_count(t.shape))
      throw std::runtime_error("container: tensor size does not match shape: " + t.name);
    write_f32_le(out, t.data);
  }
}

Container read_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("container: cannot open: " + path);
  char magic[8];
  read_bytes(in, magic, 8);
  if (std::memcmp(magic, kContainerMagic, 8) != 0) throw std::runtime_error("container: bad magic in " + path);
  const std::uint64_t header_len = read_u64_le(in);
  Container c;
  c.header_json.resize(header_len);
  read_bytes(in, c.header_json.data(), header_len);
  const nlohmann::json header = nlohmann::json::parse(c.header_json);
  for (const auto& spec : header.at("tensors")) {
    ContainerTensor t;
    t.name = spec.at("name").get<std::string>();
    t.shape = spec.at("shape").get<std::vector<std::int64_t>>();
    t.data.resize(static_cast<size_t>(element_count(t.shape)));
    read_f32_le(in, t.data);
    c.tensors.push_back(std::move(t));
  }
  return c;
}

void save_dataset(const std::string& path, const TrajectoryDataset& ds) {
  ordered_json header;
  header["kind"] = "dataset";
  header["schema-version"] = 1;
  header["n-traj"] = ds.n_traj;
  header["horizon"] = ds.horizon;
  header["channels"] = ds.channels;
  header["height"] = ds.height;
  header["width"] = ds.width;
  header["control-dim"] = ds.control_dim;
  header["featurizer"] = ds.featurizer_id;
  header["seed"] = ds.seed;
  header["standardizer"] = standardizer_to_json(ds.standardizer);
  header["tensors"] = ordered_json::array(
      {ordered_json{{"name", "frames"},
                    {"shape", {ds.n_traj, ds.horizon + 1, ds.channels, ds.height, ds.width}}},
       ordered_json{{"name", "actions"}, {"shape", {ds.n_traj, ds.horizon, ds.control_dim}}}});

  Container c;
  c.header_json = header.dump();
  c.tensors.resize(2);
  c.tensors[0].name = "frames";
  c.tensors[0].shape = {ds.n_traj, ds.horizon + 1, ds.channels, ds.height, ds.width};
  c.tensors[0].data = ds.frames;
  c.tensors[1].name = "actions";
  c.tensors[1].shape = {ds.n_traj, ds.horizon, ds.control_dim};
  c.tensors[1].data = ds.actions;
  write_container(path, c);
}

TrajectoryDataset load_dataset(const std::string& path) {
  const Container c = read_container(path);
  const nlohmann::json header = nlohmann::json::parse(c.header_json);
  check_kind(header, "dataset");
  TrajectoryDataset ds;
  ds.n_traj = header.at("n-traj").get<int>();
  ds.horizon = header.at("horizon").get<int>();
  ds.channels = header.at("channels").get<int>();
  ds.height = header.at("height").get<int>();
  ds.width = header.at("width").get<int>();
  ds.control_dim = header.at("control-dim").get<int>();
  ds.featurizer_id = header.at("featurizer").get<std::string>();
  ds.seed = header.at("seed").get<std::uint64_t>();
  ds.standardizer = standardizer_from_json(header.at("standardizer"));
  ds.allocate();
  if (c.tensors.size() != 2 || c.tensors[0].data.size() != ds.frames.size() ||
      c.tensors[1].data.size() != ds.actions.size())
    throw std::runtime_error("container: dataset payload shape mismatch");
  ds.frames = c.tensors[0].data;
  ds.actions = c.tensors[1].data;
  return ds;
}

void save_model(const std::string& path, const ModelBundle& bundle) {
  const BilinearModel& m = bundle.model;
  ordered_json header;
  header["kind"] = "dynamics-model";
  header["schema-version"] = 1;
  header["variant"] = to_string(m.variant);
  header["levels"] = m.levels;
  header["channels"] = m.channels;
  header["control-dim"] = m.control_dim;
  header["filter-size"] = m.filter_size;
  header["resolutions"] = m.resolutions;
  header["featurizer"] = bundle.featurizer_id;
  header["standardizer"] = standardizer_to_json(bundle.standardizer);

  Container c;
  ordered_json tensor_specs = ordered_json::array();
  const int slots = m.control_dim + 1;
  for (int l = 0; l <= m.levels; ++l) {
    const std::string prefix = "level" + std::to_string(l) + "-";
    ContainerTensor weights, biases;
    weights.name = prefix + "weights";
    biases.name = prefix + "biases";
    const int cells = m.resolutions[static_cast<size_t>(l)] * m.resolutions[static_cast<size_t>(l)];
    if (m.variant == DynamicsVariant::LocallyConnected) {
      const LocallyConnectedLevel& lvl = m.local[static_cast<size_t>(l)];
      weights.shape = {m.channels, cells, slots, lvl.stencil()};
      weights.data.assign(lvl.weights.begin(), lvl.weights.end());
      biases.shape = {m.channels, cells, slots};
      biases.data.assign(lvl.biases.begin(), lvl.biases.end());
    } else {
      const FullyConnectedLevel& lvl = m.dense[static_cast<size_t>(l)];
      weights.shape = {m.channels, slots, cells, cells};
      weights.data.reserve(static_cast<size_t>(m.channels) * slots * cells * cells);
      biases.shape = {m.channels, slots, cells};
      biases.data.reserve(static_cast<size_t>(m.channels) * slots * cells);
      for (size_t i = 0; i < lvl.weights.size(); ++i) {
        const Eigen::MatrixXd& w = lvl.weights[i];
        for (int r = 0; r < w.rows(); ++r)
          for (int col = 0; col < w.cols(); ++col) weights.data.push_back(static_cast<float>(w(r, col)));
        for (int r = 0; r < lvl.biases[i].size(); ++r) biases.data.push_back(static_cast<float>(lvl.biases[i][r]));
      }
    }
    tensor_specs.push_back(ordered_json{{"name", weights.name}, {"shape", weights.shape}});
    tensor_specs.push_back(ordered_json{{"name", biases.name}, {"shape", biases.shape}});
    c.tensors.push_back(std::move(weights));
    c.tensors.push_back(std::move(biases));
  }
  header["tensors"] = tensor_specs;
  c.header_json = header.dump();
  write_container(path, c);
}

ModelBundle load_model(const std::string& path) {
  const Container c = read_container(path);
  const nlohmann::json header = nlohmann::json::parse(c.header_json);
  check_kind(header, "dynamics-model");
  ModelBundle bundle;
  bundle.featurizer_id = header.at("featurizer").get<std::string>();
  bundle.standardizer = standardizer_from_json(header.at("standardizer"));
  const DynamicsVariant variant = dynamics_variant_from_string(header.at("variant").get<std::string>());
  const std::vector<int> resolutions = header.at("resolutions").get<std::vector<int>>();
  const int channels = header.at("channels").get<int>();
  const int control_dim = header.at("control-dim").get<int>();
  const int filter_size = header.at("filter-size").get<int>();
  bundle.model = BilinearModel::zeros(variant, resolutions, channels, control_dim, filter_size,
                                      /*allow_coarse_only=*/false);
  const int slots = control_dim + 1;
  if (c.tensors.size() != 2 * resolutions.size()) throw std::runtime_error("container: model tensor count mismatch");
  for (size_t l = 0; l < resolutions.size(); ++l) {
    const ContainerTensor& weights = c.tensors[2 * l];
    const ContainerTensor& biases = c.tensors[2 * l + 1];
    if (variant == DynamicsVariant::LocallyConnected) {
      LocallyConnectedLevel& lvl = bundle.model.local[l];
      if (weights.data.size() != lvl.weights.size() || biases.data.size() != lvl.biases.size())
        throw std::runtime_error("container: model payload shape mismatch");
      for (size_t i = 0; i < weights.data.size(); ++i) lvl.weights[i] = static_cast<double>(weights.data[i]);
      for (size_t i = 0; i < biases.data.size(); ++i) lvl.biases[i] = static_cast<double>(biases.data[i]);
    } else {
      FullyConnectedLevel& lvl = bundle.model.dense[l];
      const int cells = lvl.cells();
      if (weights.data.size() != static_cast<size_t>(channels) * slots * cells * cells ||
          biases.data.size() != static_cast<size_t>(channels) * slots * cells)
        throw std::runtime_error("container: model payload shape mismatch");
      size_t wi = 0, bi = 0;
      for (size_t i = 0; i < lvl.weights.size(); ++i) {
        for (int r = 0; r < cells; ++r)
          for (int col = 0; col < cells; ++col) lvl.weights[i](r, col) = static_cast<double>(weights.data[wi++]);
        for (int r = 0; r < cells; ++r) lvl.biases[i][r] = static_cast<double>(biases.data[bi++]);
      }
    }
  }
  return bundle;
}

void save_weights(const std::string& path, const PolicyWeights& weights) {
  ordered_json j;
  j["kind"] = "policy-weights";
  j["schema-version"] = 1;
  j["levels"] = weights.levels;
  j["channels"] = weights.channels;
  j["control-dim"] = static_cast<int>(weights.lambda.size());
  j["w"] = std::vector<double>(weights.w.data(), weights.w.data() + weights.w.size());
  j["lambda"] = std::vector<double>(weights.lambda.data(), weights.lambda.data() + weights.lambda.size());
  j["bias"] = weights.bias;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("weights: cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("weights: write failed");
}

PolicyWeights load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("weights: cannot open: " + path);
  nlohmann::json j;
  in >> j;
  check_kind(j, "policy-weights");
  PolicyWeights w;
  w.levels = j.at("levels").get<int>();
  w.channels = j.at("channels").get<int>();
  const std::vector<double> wv = j.at("w").get<std::vector<double>>();
  const std::vector<double> lv = j.at("lambda").get<std::vector<double>>();
  if (static_cast<int>(wv.size()) != (w.levels + 1) * w.channels ||
      static_cast<int>(lv.size()) != j.at("control-dim").get<int>())
    throw std::runtime_error("weights: inconsistent dimensions in " + path);
  w.w = Eigen::Map<const Eigen::VectorXd>(wv.data(), static_cast<Eigen::Index>(wv.size()));
  w.lambda = Eigen::Map<const Eigen::VectorXd>(lv.data(), static_cast<Eigen::Index>(lv.size()));
  w.bias = j.at("bias").get<double>();
  return w;
}

}  // namespace servo
