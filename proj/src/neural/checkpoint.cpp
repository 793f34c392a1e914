#include "msca/neural/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

namespace msca::neural {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

const Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw DataError("checkpoint has no tensor '" + name + "'");
}

const std::string& Checkpoint::value(const std::string& key) const {
  auto it = header.find(key);
  if (it == header.end()) throw DataError("checkpoint header has no key '" + key + "'");
  return it->second;
}

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out << kCheckpointMagic << " v" << kCheckpointVersion << '\n';
  for (const auto& [k, v] : ckpt.header) out << k << '=' << v << '\n';
  out << "tensors " << ckpt.tensors.size() << '\n';
  for (const auto& [name, t] : ckpt.tensors) {
    out << name << ' ' << t.rank();
    for (auto d : t.shape()) out << ' ' << d;
    out << '\n';
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
    out << '\n';
  }
}

Checkpoint load_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("checkpoint is empty");
  const std::string expected = std::string(kCheckpointMagic) + " v" + std::to_string(kCheckpointVersion);
  if (line != expected) {
    throw DataError("bad checkpoint magic '" + line + "', expected '" + expected + "'");
  }
  Checkpoint ckpt;
  std::size_t count = 0;
  while (std::getline(in, line)) {
    if (line.starts_with("tensors ")) {
      count = std::stoul(line.substr(8));
      break;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("bad checkpoint header line '" + line + "'");
    ckpt.header[line.substr(0, eq)] = line.substr(eq + 1);
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw DataError("checkpoint truncated");
    std::istringstream ls(line);
    std::string name;
    std::size_t rank = 0;
    ls >> name >> rank;
    Shape shape(rank);
    for (auto& d : shape) ls >> d;
    if (!ls) throw DataError("bad tensor header '" + line + "'");
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data().data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (in.get() != '\n' || !in) throw DataError("checkpoint tensor '" + name + "' truncated");
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  return ckpt;
}

}  // namespace msca::neural
