#include "cgnf/io.hpp"

#include <cstring>
#include <fstream>

#include "cgnf/errors.hpp"

namespace cgnf {

namespace {

constexpr char kMagic[8] = {'C', 'G', 'N', 'F', 'M', 'D', 'L', '1'};
constexpr std::uint32_t kVersion = 1;

struct Writer {
  std::vector<std::uint8_t>& out;
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  void u8(std::uint8_t v) { raw(&v, 1); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void i32(std::int32_t v) { raw(&v, 4); }
  void i64(std::int64_t v) { raw(&v, 8); }
  void f64(double v) { raw(&v, 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
};

struct Reader {
  const std::uint8_t* cur;
  const std::uint8_t* end;
  void raw(void* p, std::size_t n) {
    if (cur + n > end) throw Error("model file truncated");
    std::memcpy(p, cur, n);
    cur += n;
  }
  std::uint8_t u8() { std::uint8_t v; raw(&v, 1); return v; }
  std::uint32_t u32() { std::uint32_t v; raw(&v, 4); return v; }
  std::uint64_t u64() { std::uint64_t v; raw(&v, 8); return v; }
  std::int32_t i32() { std::int32_t v; raw(&v, 4); return v; }
  std::int64_t i64() { std::int64_t v; raw(&v, 8); return v; }
  double f64() { double v; raw(&v, 8); return v; }
  std::string str() {
    const std::uint32_t n = u32();
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
};

void write_matrix_row_major(Writer& w, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.f64(m(r, c));
}

void read_matrix_row_major(Reader& r, Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.f64();
}

void write_vector(Writer& w, const Eigen::VectorXd& v) {
  w.u32(static_cast<std::uint32_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) w.f64(v[i]);
}

Eigen::VectorXd read_vector(Reader& r) {
  const std::uint32_t n = r.u32();
  Eigen::VectorXd v(n);
  for (std::uint32_t i = 0; i < n; ++i) v[i] = r.f64();
  return v;
}

void write_net(Writer& w, const DenseNet& net) {
  w.u32(static_cast<std::uint32_t>(net.layer_sizes.size()));
  for (int s : net.layer_sizes) w.i32(s);
  w.u8(net.output_activation == OutputActivation::EluPlus ? 1 : 0);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    write_matrix_row_major(w, net.weights[l]);
    for (Eigen::Index i = 0; i < net.biases[l].size(); ++i)
      w.f64(net.biases[l][i]);
  }
}

DenseNet read_net(Reader& r) {
  DenseNet net;
  const std::uint32_t n_sizes = r.u32();
  if (n_sizes < 2) throw Error("model file: bad net layer count");
  net.layer_sizes.resize(n_sizes);
  for (auto& s : net.layer_sizes) s = r.i32();
  net.output_activation =
      r.u8() ? OutputActivation::EluPlus : OutputActivation::Identity;
  for (std::uint32_t l = 0; l + 1 < n_sizes; ++l) {
    Eigen::MatrixXd wmat(net.layer_sizes[l + 1], net.layer_sizes[l]);
    read_matrix_row_major(r, wmat);
    net.weights.push_back(std::move(wmat));
    Eigen::VectorXd b(net.layer_sizes[l + 1]);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = r.f64();
    net.biases.push_back(std::move(b));
  }
  return net;
}

}  // namespace

std::uint64_t fnv1a_64(const std::uint8_t* data, std::size_t size) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotFound(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<std::uint8_t>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

void serialize_net(const DenseNet& net, std::vector<std::uint8_t>& out) {
  Writer w{out};
  write_net(w, net);
}

DenseNet deserialize_net(const std::uint8_t*& cursor, const std::uint8_t* end) {
  Reader r{cursor, end};
  DenseNet net = read_net(r);
  cursor = r.cur;
  return net;
}

std::vector<std::uint8_t> serialize_model(const Cgnf& cgnf,
                                          std::uint64_t data_hash,
                                          const std::string& config_echo) {
  std::vector<std::uint8_t> bytes;
  Writer w{bytes};
  w.raw(kMagic, sizeof(kMagic));
  w.u32(kVersion);

  const auto& vars = cgnf.dag.variables();
  w.u32(static_cast<std::uint32_t>(vars.size()));
  for (const auto& v : vars) {
    w.str(v.name);
    w.u8(v.kind == VariableKind::Discrete ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(v.support.size()));
    for (long s : v.support) w.i64(s);
  }
  for (const auto& v : vars) {
    const auto& ps = cgnf.dag.parents(v.name);
    w.u32(static_cast<std::uint32_t>(ps.size()));
    for (const auto& p : ps) w.u32(static_cast<std::uint32_t>(cgnf.dag.index_of(p)));
  }

  w.u32(static_cast<std::uint32_t>(cgnf.config.embedding_hidden.size()));
  for (int s : cgnf.config.embedding_hidden) w.i32(s);
  w.i32(cgnf.config.embedding_width);
  w.u32(static_cast<std::uint32_t>(cgnf.config.integrand_hidden.size()));
  for (int s : cgnf.config.integrand_hidden) w.i32(s);
  w.i32(cgnf.config.quadrature_nodes);

  write_matrix_row_major(w, cgnf.sigma_z);

  for (std::size_t i = 0; i < vars.size(); ++i) {
    w.f64(cgnf.preprocess.mean[i]);
    w.f64(cgnf.preprocess.stddev[i]);
    w.u8(cgnf.preprocess.discrete[i] ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(cgnf.preprocess.support[i].size()));
    for (long s : cgnf.preprocess.support[i]) w.i64(s);
  }

  for (const auto& norm : cgnf.normalizers) {
    w.u8(norm.embedding ? 1 : 0);
    if (norm.embedding)
      write_net(w, *norm.embedding);
    else
      write_vector(w, norm.constant_embedding);
    write_net(w, norm.integrand);
    write_vector(w, norm.offset_weight);
    w.f64(norm.offset_bias);
  }

  w.u64(data_hash);
  w.str(config_echo);
  w.u64(fnv1a_64(bytes.data(), bytes.size()));
  return bytes;
}

LoadedModel deserialize_model(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof(kMagic) + 12 ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw Error("not a model file");
  const std::uint64_t stored_checksum =
      fnv1a_64(bytes.data(), bytes.size() - 8);
  Reader r{bytes.data(), bytes.data() + bytes.size()};
  r.cur += sizeof(kMagic);
  if (r.u32() != kVersion) throw Error("unsupported model file version");

  const std::uint32_t k = r.u32();
  std::vector<VariableSpec> vars(k);
  for (auto& v : vars) {
    v.name = r.str();
    v.kind = r.u8() ? VariableKind::Discrete : VariableKind::Continuous;
    const std::uint32_t ns = r.u32();
    v.support.resize(ns);
    for (auto& s : v.support) s = r.i64();
  }
  std::map<std::string, std::set<std::string>> parents;
  for (std::uint32_t i = 0; i < k; ++i) {
    const std::uint32_t np = r.u32();
    auto& ps = parents[vars[i].name];
    for (std::uint32_t j = 0; j < np; ++j) ps.insert(vars[r.u32()].name);
  }
  Dag dag(vars, parents);

  FlowConfig config;
  config.embedding_hidden.resize(r.u32());
  for (auto& s : config.embedding_hidden) s = r.i32();
  config.embedding_width = r.i32();
  config.integrand_hidden.resize(r.u32());
  for (auto& s : config.integrand_hidden) s = r.i32();
  config.quadrature_nodes = r.i32();

  Eigen::MatrixXd sigma(k, k);
  read_matrix_row_major(r, sigma);

  LoadedModel loaded{make_cgnf(dag, config, 0, sigma), 0, ""};
  Cgnf& cgnf = loaded.cgnf;
  for (std::uint32_t i = 0; i < k; ++i) {
    cgnf.preprocess.mean[i] = r.f64();
    cgnf.preprocess.stddev[i] = r.f64();
    cgnf.preprocess.discrete[i] = r.u8() != 0;
    cgnf.preprocess.support[i].resize(r.u32());
    for (auto& s : cgnf.preprocess.support[i]) s = r.i64();
  }
  for (auto& norm : cgnf.normalizers) {
    const bool has_embedding = r.u8() != 0;
    if (has_embedding) {
      norm.embedding = read_net(r);
      norm.constant_embedding = Eigen::VectorXd();
    } else {
      norm.embedding.reset();
      norm.constant_embedding = read_vector(r);
    }
    norm.integrand = read_net(r);
    norm.offset_weight = read_vector(r);
    norm.offset_bias = r.f64();
  }
  loaded.data_hash = r.u64();
  loaded.config_echo = r.str();
  if (r.u64() != stored_checksum) throw Error("model file checksum mismatch");
  return loaded;
}

void save_model(const Cgnf& cgnf, const std::string& path,
                std::uint64_t data_hash, const std::string& config_echo) {
  const auto bytes = serialize_model(cgnf, data_hash, config_echo);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write model file: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

LoadedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotFound(path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

std::uint64_t model_hash(const Cgnf& cgnf) {
  const auto bytes = serialize_model(cgnf, 0, "");
  return fnv1a_64(bytes.data(), bytes.size());
}

}  // namespace cgnf
