// SPDX-License-Identifier: Apache-2.0
#include "xmodal/checkpoint.hpp"

#include "xmodal/error.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

namespace xmodal {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr std::array<char, 8> kMagic = {'X', 'M', 'O', 'D', 'A', 'L', 'C', 'K'};
constexpr std::uint32_t kFlagGemLearnable = 1u;

struct Entry {
  std::string name;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
};

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw Error(Errc::io, "checkpoint truncated");
  }
  return v;
}

std::vector<Entry> table_of(const EncoderParams& p) {
  std::vector<Entry> t;
  visit_tensors(p, false, [&](const std::string& name, auto, auto rows, auto cols, bool) {
    t.push_back({name, static_cast<std::uint32_t>(rows), static_cast<std::uint32_t>(cols)});
  });
  return t;
}

}  // namespace

void write_checkpoint(std::ostream& os, const EncoderParams& params) {
  params.validate();
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint32_t>(os, params.gem_learnable ? kFlagGemLearnable : 0u);
  const auto table = table_of(params);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(table.size()));
  for (const auto& e : table) {
    put<std::uint16_t>(os, static_cast<std::uint16_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put<std::uint32_t>(os, e.rows);
    put<std::uint32_t>(os, e.cols);
  }
  visit_tensors(params, false, [&](const std::string&, std::span<const double> v, auto, auto, bool) {
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()));
  });
  if (!os) throw Error(Errc::io, "failed writing checkpoint");
}

void save_checkpoint(const std::filesystem::path& path, const EncoderParams& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(Errc::io, "cannot open " + path.string() + " for writing");
  write_checkpoint(os, params);
}

void read_checkpoint(std::istream& is, EncoderParams& params) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw Error(Errc::integrity, "not an xmodal checkpoint");
  }
  const auto version = get<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw Error(Errc::integrity, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto flags = get<std::uint32_t>(is);
  const auto count = get<std::uint32_t>(is);
  std::vector<Entry> stored(count);
  for (auto& e : stored) {
    const auto len = get<std::uint16_t>(is);
    e.name.resize(len);
    if (!is.read(e.name.data(), len)) throw Error(Errc::io, "checkpoint truncated");
    e.rows = get<std::uint32_t>(is);
    e.cols = get<std::uint32_t>(is);
  }

  EncoderParams loaded = params;
  loaded.gem_learnable = (flags & kFlagGemLearnable) != 0;
  const auto expected = table_of(loaded);
  if (expected.size() != stored.size()) {
    throw Error(Errc::shape_mismatch, "checkpoint holds " + std::to_string(stored.size()) +
                                          " tensors, encoder expects " + std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < stored.size(); ++i) {
    const auto& s = stored[i];
    const auto& e = expected[i];
    if (s.name != e.name || s.rows != e.rows || s.cols != e.cols) {
      throw Error(Errc::shape_mismatch, "checkpoint tensor " + s.name + " [" + std::to_string(s.rows) + "x" +
                                            std::to_string(s.cols) + "] does not match encoder tensor " +
                                            e.name + " [" + std::to_string(e.rows) + "x" +
                                            std::to_string(e.cols) + "]");
    }
  }
  visit_tensors(loaded, false, [&](const std::string& name, std::span<double> v, auto, auto, bool) {
    if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()))) {
      throw Error(Errc::io, "checkpoint truncated in " + name);
    }
  });
  loaded.validate();
  params = std::move(loaded);
}

void load_checkpoint(const std::filesystem::path& path, EncoderParams& params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::io, "cannot open checkpoint " + path.string());
  read_checkpoint(is, params);
}

}  // namespace xmodal
