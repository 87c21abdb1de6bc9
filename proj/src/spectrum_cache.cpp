#include <cstdio>
#include <cstring>
#include <fstream>

#include "bhchaos/sweep.hpp"

namespace bhchaos {

namespace {

constexpr char kMagic[8] = {'B', 'H', 'S', 'P', 'E', 'C', '1', '\0'};

template <class T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
bool read_pod(std::istream& is, T& v) {
  return static_cast<bool>(is.read(reinterpret_cast<char*>(&v), sizeof v));
}

struct Hasher {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  template <class T>
  void add(const T& v) {
    unsigned char bytes[sizeof v];
    std::memcpy(bytes, &v, sizeof v);
    for (unsigned char c : bytes) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  }
};

}  // namespace

std::string SpectrumCache::key(const ChainParams& p) {
  Hasher h;
  h.add(p.sites);
  h.add(p.bosons);
  h.add(p.lambda);
  for (double j : p.couplings) h.add(j);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h.h));
  return buf;
}

std::filesystem::path SpectrumCache::path_for(const ChainParams& p) const {
  return dir_ / ("spectrum_" + key(p) + ".bin");
}

std::optional<SpectrumBundle> SpectrumCache::load(const ChainParams& p,
                                                  bool need_vectors) const {
  std::ifstream in(path_for(p), std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    return std::nullopt;
  int sites = 0, bosons = 0, ncoup = 0;
  double lambda = 0.0;
  if (!read_pod(in, sites) || !read_pod(in, bosons) || !read_pod(in, lambda) || !read_pod(in, ncoup))
    return std::nullopt;
  if (sites != p.sites || bosons != p.bosons || lambda != p.lambda ||
      ncoup != static_cast<int>(p.couplings.size()))
    return std::nullopt;
  for (double j : p.couplings) {
    double stored = 0.0;
    if (!read_pod(in, stored) || stored != j) return std::nullopt;
  }
  std::uint64_t dim = 0;
  std::uint8_t has_vectors = 0;
  if (!read_pod(in, dim) || !read_pod(in, has_vectors)) return std::nullopt;
  if (need_vectors && !has_vectors) return std::nullopt;

  SpectrumBundle b;
  b.params = p;
  const auto d = static_cast<Eigen::Index>(dim);
  b.eigenvalues.resize(d);
  if (!in.read(reinterpret_cast<char*>(b.eigenvalues.data()),
               static_cast<std::streamsize>(dim * sizeof(double))))
    return std::nullopt;
  if (need_vectors) {
    b.eigenvectors.resize(d, d);
    if (!in.read(reinterpret_cast<char*>(b.eigenvectors.data()),
                 static_cast<std::streamsize>(dim * dim * sizeof(double))))
      return std::nullopt;
  }
  return b;
}

void SpectrumCache::store(const SpectrumBundle& b) const {
  std::filesystem::create_directories(dir_);
  const auto path = path_for(b.params);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os.write(kMagic, 8);
    write_pod(os, b.params.sites);
    write_pod(os, b.params.bosons);
    write_pod(os, b.params.lambda);
    write_pod(os, static_cast<int>(b.params.couplings.size()));
    for (double j : b.params.couplings) write_pod(os, j);
    write_pod(os, static_cast<std::uint64_t>(b.dimension()));
    write_pod(os, static_cast<std::uint8_t>(b.has_vectors()));
    os.write(reinterpret_cast<const char*>(b.eigenvalues.data()),
             static_cast<std::streamsize>(b.dimension() * sizeof(double)));
    if (b.has_vectors())
      os.write(reinterpret_cast<const char*>(b.eigenvectors.data()),
               static_cast<std::streamsize>(b.eigenvectors.size() * sizeof(double)));
    if (!os) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

SpectrumBundle SpectrumCache::get(const ChainParams& p, bool need_vectors,
                                  bool* hit) const {
  if (auto cached = load(p, need_vectors)) {
    if (hit) *hit = true;
    return std::move(*cached);
  }
  if (hit) *hit = false;
  const auto basis = enumerate_fock_basis(p.bosons, p.sites);
  auto bundle = diagonalize(build_hamiltonian(basis, p), p, need_vectors);
  store(bundle);
  return bundle;
}

}  // namespace bhchaos
