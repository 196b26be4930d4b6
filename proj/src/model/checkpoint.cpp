#include "cascadeqa/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "cascadeqa/util/error.hpp"

namespace cascadeqa {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.write(buf, sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  char buf[sizeof(T)];
  if (!in.read(buf, sizeof(T))) throw ParseError("checkpoint is truncated");
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const CascadeModel& model) {
  const ModelConfig& c = model.config();
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  for (std::uint64_t v : {std::uint64_t{c.embedding_dim}, std::uint64_t{c.hidden}, std::uint64_t{c.depth},
                          std::uint64_t{c.context}, std::uint64_t{c.max_span_length}, c.seed, c.embedding_seed})
    put<std::uint64_t>(out, v);
  for (bool b : {c.layout.question_span, c.layout.span_context, c.layout.combined, c.layout.level2, c.layout.level3})
    put<std::uint8_t>(out, b ? 1 : 0);
  const ParameterStore& p = model.parameters();
  put<std::uint64_t>(out, p.size());
  for (ParamId id = 0; id < p.size(); ++id) {
    const std::string& name = p.name(id);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    const Tensor& t = p.value(id);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    for (double v : t.values()) put<double>(out, v);
  }
}

CascadeModel read_checkpoint(std::istream& in) {
  char magic[sizeof(kCheckpointMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw VersionError("not a cascadeqa checkpoint (bad magic)");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw VersionError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  ModelConfig c;
  c.embedding_dim = get<std::uint64_t>(in);
  c.hidden = get<std::uint64_t>(in);
  c.depth = get<std::uint64_t>(in);
  c.context = get<std::uint64_t>(in);
  c.max_span_length = get<std::uint64_t>(in);
  c.seed = get<std::uint64_t>(in);
  c.embedding_seed = get<std::uint64_t>(in);
  c.layout.question_span = get<std::uint8_t>(in) != 0;
  c.layout.span_context = get<std::uint8_t>(in) != 0;
  c.layout.combined = get<std::uint8_t>(in) != 0;
  c.layout.level2 = get<std::uint8_t>(in) != 0;
  c.layout.level3 = get<std::uint8_t>(in) != 0;
  try {
    c.validate();
  } catch (const ContractError& e) {
    throw VersionError(std::string("checkpoint holds an invalid model config: ") + e.what());
  }

  const auto count = get<std::uint64_t>(in);
  if (count > (1u << 20)) throw ParseError("checkpoint parameter count is implausible");
  ParameterStore store;
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto len = get<std::uint32_t>(in);
    if (len > 4096) throw ParseError("checkpoint parameter name is implausibly long");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw ParseError("checkpoint is truncated");
    const auto rank = get<std::uint32_t>(in);
    if (rank < 1 || rank > 2) throw ParseError("checkpoint parameter " + name + " has rank " + std::to_string(rank));
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = get<std::uint64_t>(in);
      if (d == 0 || d > (1u << 24)) throw ParseError("checkpoint parameter " + name + " has a bad dimension");
      n *= d;
    }
    std::vector<double> data(n);
    for (double& v : data) v = get<double>(in);
    store.add(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return CascadeModel(c, std::move(store));
}

void save_checkpoint(const std::string& path, const CascadeModel& model) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint: " + tmp);
    write_checkpoint(out, model);
    out.flush();
    if (!out) throw IoError("failed writing checkpoint: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place: " + path + ": " + ec.message());
}

CascadeModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  return read_checkpoint(in);
}

}  // namespace cascadeqa
