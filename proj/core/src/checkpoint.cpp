#include "dasad/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace dasad {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

using json = nlohmann::json;

std::filesystem::path with_ext(const std::filesystem::path& stem, const char* ext) {
  auto p = stem;
  p += ext;
  return p;
}

std::string activation_name(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

Activation activation_from(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  throw std::runtime_error("unknown activation '" + s + "'");
}

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& stem, std::uint64_t creation_seed) {
  const auto bin_path = with_ext(stem, ".bin");
  std::ofstream bin(bin_path, std::ios::binary | std::ios::trunc);
  if (!bin) throw std::runtime_error("cannot write " + bin_path.string());

  json arrays = json::array();
  std::uint64_t offset = 0;
  for (const auto& p : model.parameters()) {
    bin.write(reinterpret_cast<const char*>(p.values.data()),
              static_cast<std::streamsize>(p.values.size_bytes()));
    arrays.push_back({{"name", p.name}, {"shape", {p.rows, p.cols}}, {"offset", offset}});
    offset += p.values.size_bytes();
  }
  if (!bin) throw std::runtime_error("write failed: " + bin_path.string());

  const auto& a = model.arch;
  json manifest = {
      {"format", "dasad-checkpoint"},
      {"version", 1},
      {"dtype", "f64"},
      {"layout", "column-major"},
      {"creation_seed", creation_seed},
      {"data_file", bin_path.filename().string()},
      {"architecture",
       {{"input_dim", a.input_dim},
        {"latent_dim", a.latent_dim},
        {"hidden_units", a.hidden_units},
        {"decoder_conditioned", a.decoder_conditioned},
        {"domain_classifier", a.domain_classifier},
        {"activation", activation_name(a.activation)}}},
      {"arrays", arrays},
  };
  const auto json_path = with_ext(stem, ".json");
  std::ofstream js(json_path, std::ios::trunc);
  if (!js) throw std::runtime_error("cannot write " + json_path.string());
  js << manifest.dump(2) << '\n';
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& stem) {
  const auto json_path = with_ext(stem, ".json");
  std::ifstream js(json_path);
  if (!js) throw std::runtime_error("cannot open checkpoint manifest " + json_path.string());
  json manifest;
  try {
    manifest = json::parse(js);
  } catch (const json::exception& e) {
    throw std::runtime_error(json_path.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != "dasad-checkpoint" || manifest.value("dtype", "") != "f64") {
    throw std::runtime_error(json_path.string() + ": not an f64 dasad checkpoint");
  }
  const auto& ja = manifest.at("architecture");
  Architecture arch;
  arch.input_dim = ja.at("input_dim");
  arch.latent_dim = ja.at("latent_dim");
  arch.hidden_units = ja.at("hidden_units");
  arch.decoder_conditioned = ja.at("decoder_conditioned");
  arch.domain_classifier = ja.at("domain_classifier");
  arch.activation = activation_from(ja.at("activation"));

  LoadedCheckpoint out;
  out.creation_seed = manifest.at("creation_seed");
  out.model = Model::init(arch, 0, 1.0);

  const auto bin_path = json_path.parent_path() / manifest.at("data_file").get<std::string>();
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open checkpoint data " + bin_path.string());

  auto params = out.model.parameters();
  const auto& arrays = manifest.at("arrays");
  if (arrays.size() != params.size()) {
    throw std::runtime_error(json_path.string() + ": expected " + std::to_string(params.size()) +
                             " arrays, found " + std::to_string(arrays.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& entry = arrays[i];
    auto& p = params[i];
    const auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
    if (entry.at("name").get<std::string>() != p.name || shape.size() != 2 || shape[0] != p.rows ||
        shape[1] != p.cols) {
      throw std::runtime_error(json_path.string() + ": array '" + entry.at("name").get<std::string>() +
                               "' does not match architecture slot '" + p.name + "'");
    }
    bin.seekg(static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>()));
    bin.read(reinterpret_cast<char*>(p.values.data()), static_cast<std::streamsize>(p.values.size_bytes()));
    if (!bin) throw std::runtime_error(bin_path.string() + ": truncated while reading '" + p.name + "'");
  }
  return out;
}

}  // namespace dasad
