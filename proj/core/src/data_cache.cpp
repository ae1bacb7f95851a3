#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "dasad/data.hpp"

namespace dasad {

namespace {

using json = nlohmann::json;
constexpr char kMagic[8] = {'D', 'S', 'A', 'D', 'C', 'A', 'S', 'E'};
constexpr std::uint32_t kVersion = 1;

std::filesystem::path with_ext(const std::filesystem::path& stem, const char* ext) {
  auto p = stem;
  p += ext;
  return p;
}

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw std::runtime_error(path.string() + ": truncated dataset cache");
  return v;
}

void write_samples(std::ostream& os, const Dataset& ds) {
  std::vector<float> buf;
  for (const auto& s : ds) {
    put<std::uint8_t>(os, static_cast<std::uint8_t>(s.c));
    put<std::uint8_t>(os, static_cast<std::uint8_t>(s.d));
    put<std::uint8_t>(os, static_cast<std::uint8_t>(s.role));
    put<std::int8_t>(os, static_cast<std::int8_t>(s.digit));
    buf.assign(s.x.data(), s.x.data() + s.x.size());
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
}

Dataset read_samples(std::istream& is, std::size_t n, std::size_t dim, const std::filesystem::path& path) {
  Dataset ds;
  ds.reserve(n);
  std::vector<float> buf(dim);
  for (std::size_t i = 0; i < n; ++i) {
    LabeledSample s;
    s.c = static_cast<ClassLabel>(get<std::uint8_t>(is, path));
    s.d = static_cast<Domain>(get<std::uint8_t>(is, path));
    s.role = static_cast<Role>(get<std::uint8_t>(is, path));
    s.digit = get<std::int8_t>(is, path);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(dim * sizeof(float)));
    if (!is) throw std::runtime_error(path.string() + ": truncated dataset cache");
    s.x = Eigen::Map<const Eigen::VectorXf>(buf.data(), static_cast<Eigen::Index>(dim)).cast<double>();
    ds.push_back(std::move(s));
  }
  return ds;
}

json digits(const std::set<int>& s) { return json(std::vector<int>(s.begin(), s.end())); }

}  // namespace

void save_case_cache(const CaseData& data, const std::filesystem::path& stem, const std::string& source_checksum,
                     const CaseOptions& opts) {
  static_assert(std::endian::native == std::endian::little, "cache I/O assumes little-endian");
  const std::size_t dim = data.train.empty() ? 0 : static_cast<std::size_t>(data.train.front().x.size());
  const auto bin_path = with_ext(stem, ".bin");
  {
    std::ofstream os(bin_path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + bin_path.string());
    os.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(os, kVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(data.split.case_id));
    put<std::uint64_t>(os, data.seed);
    put<std::uint64_t>(os, dim);
    put<std::uint64_t>(os, data.train.size());
    put<std::uint64_t>(os, data.test.size());
    write_samples(os, data.train);
    write_samples(os, data.test);
    if (!os) throw std::runtime_error("write failed: " + bin_path.string());
  }
  json sidecar = {
      {"format", "dasad-case-cache"},
      {"version", kVersion},
      {"case_id", data.split.case_id},
      {"seed", data.seed},
      {"input_dim", dim},
      {"train_count", data.train.size()},
      {"test_count", data.test.size()},
      {"normal_digits", digits(data.split.normal_digits)},
      {"seen_digits", digits(data.split.seen_digits)},
      {"unseen_digits", digits(data.split.unseen_digits)},
      {"rotation_degrees", opts.rotation_degrees},
      {"train_cap_per_stratum", opts.train_cap_per_stratum},
      {"test_cap_per_role", opts.test_cap_per_role},
      {"source_checksum", source_checksum},
      {"data_checksum", sha256_file(bin_path)},
  };
  const auto json_path = with_ext(stem, ".json");
  std::ofstream js(json_path, std::ios::trunc);
  if (!js) throw std::runtime_error("cannot write " + json_path.string());
  js << sidecar.dump(2) << '\n';
}

std::optional<CacheManifest> read_cache_manifest(const std::filesystem::path& stem) {
  std::ifstream js(with_ext(stem, ".json"));
  if (!js) return std::nullopt;
  try {
    const json j = json::parse(js);
    CacheManifest m;
    m.case_id = j.at("case_id");
    m.seed = j.at("seed");
    m.train_count = j.at("train_count");
    m.test_count = j.at("test_count");
    m.input_dim = j.at("input_dim");
    m.source_checksum = j.at("source_checksum");
    m.data_checksum = j.at("data_checksum");
    m.options.rotation_degrees = j.at("rotation_degrees");
    m.options.train_cap_per_stratum = j.at("train_cap_per_stratum");
    m.options.test_cap_per_role = j.at("test_cap_per_role");
    return m;
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

CaseData load_case_cache(const std::filesystem::path& stem) {
  const auto manifest = read_cache_manifest(stem);
  const auto bin_path = with_ext(stem, ".bin");
  if (!manifest) throw std::runtime_error("missing or unreadable cache sidecar " + with_ext(stem, ".json").string());
  if (sha256_file(bin_path) != manifest->data_checksum) {
    throw std::runtime_error(bin_path.string() + ": checksum does not match its sidecar; rerun `dasad prepare`");
  }
  std::ifstream is(bin_path, std::ios::binary);
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw std::runtime_error(bin_path.string() + ": not a dasad case cache");
  }
  if (get<std::uint32_t>(is, bin_path) != kVersion) throw std::runtime_error(bin_path.string() + ": unsupported version");
  CaseData out;
  out.split = CaseSplit::for_case(static_cast<int>(get<std::uint32_t>(is, bin_path)));
  out.seed = get<std::uint64_t>(is, bin_path);
  const auto dim = get<std::uint64_t>(is, bin_path);
  const auto n_train = get<std::uint64_t>(is, bin_path);
  const auto n_test = get<std::uint64_t>(is, bin_path);
  out.train = read_samples(is, n_train, dim, bin_path);
  out.test = read_samples(is, n_test, dim, bin_path);
  check_training_availability(out.train);
  return out;
}

}  // namespace dasad
