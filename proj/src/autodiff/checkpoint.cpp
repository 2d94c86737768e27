#include "cosearch/autodiff/checkpoint.hpp"

#include "cosearch/sigproc/beat_io.hpp"

#include <json.hpp>

#include <fstream>
#include <stdexcept>

namespace cosearch::ad {

namespace {
std::filesystem::path with_suffix(std::filesystem::path p, const char* suffix) {
  p += suffix;
  return p;
}
}  // namespace

void save_checkpoint(const std::filesystem::path& stem, const NamedTensors& params) {
  nlohmann::ordered_json manifest;
  manifest["dtype"] = "f64le";
  manifest["params"] = nlohmann::ordered_json::array();
  std::ofstream bin(with_suffix(stem, ".f64"), std::ios::binary);
  std::size_t offset = 0;
  for (const auto& [name, t] : params) {
    const auto& d = t.dims();
    manifest["params"].push_back(
        {{"name", name}, {"offset", offset}, {"dims", {d.n, d.c, d.h, d.w}}});
    sigproc::write_f64_le(bin, t.data(), t.size());
    offset += t.size();
  }
  std::ofstream(with_suffix(stem, ".json"), std::ios::binary) << manifest.dump(2) << "\n";
}

NamedTensors load_checkpoint(const std::filesystem::path& stem) {
  std::ifstream mf(with_suffix(stem, ".json"));
  std::ifstream bin(with_suffix(stem, ".f64"), std::ios::binary);
  if (!mf || !bin) throw std::runtime_error("checkpoint not found: " + stem.string());
  const auto manifest = nlohmann::json::parse(mf);
  NamedTensors out;
  for (const auto& p : manifest.at("params")) {
    const auto dims = p.at("dims").get<std::vector<int>>();
    Tensor4 t({dims.at(0), dims.at(1), dims.at(2), dims.at(3)});
    bin.seekg(static_cast<std::streamoff>(p.at("offset").get<std::size_t>() * sizeof(double)));
    sigproc::read_f64_le(bin, t.data(), t.size());
    out.emplace_back(p.at("name").get<std::string>(), std::move(t));
  }
  return out;
}

}  // namespace cosearch::ad
