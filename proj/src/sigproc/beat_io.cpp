#include "cosearch/sigproc/beat_io.hpp"

#include "cosearch/core/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cosearch::sigproc {

namespace fs = std::filesystem;

namespace {

constexpr const char* kEcgNames[kEcgChannels] = {"I",  "II", "III", "aVR", "aVL", "aVF",
                                                 "V1", "V2", "V3",  "V4",  "V5",  "V6"};

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return __builtin_bswap64(v);
}

std::string beat_stem(std::int64_t id) { return "beat_" + std::to_string(id); }

}  // namespace

void write_f64_le(std::ostream& os, const double* data, std::size_t n) {
  std::vector<std::uint64_t> buf(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = to_le(std::bit_cast<std::uint64_t>(data[i]));
  os.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(n * sizeof(std::uint64_t)));
}

void read_f64_le(std::istream& is, double* data, std::size_t n) {
  std::vector<std::uint64_t> buf(n);
  is.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(n * sizeof(std::uint64_t)));
  if (static_cast<std::size_t>(is.gcount()) != n * sizeof(std::uint64_t))
    throw std::runtime_error("read_f64_le: truncated file");
  for (std::size_t i = 0; i < n; ++i) data[i] = std::bit_cast<double>(to_le(buf[i]));
}

void write_beat_directory(const fs::path& dir, const Dataset& ds, double sample_rate_hz) {
  fs::create_directories(dir);
  std::vector<std::string> split(ds.beats.size());
  for (auto i : ds.train) split[i] = "train";
  for (auto i : ds.test) split[i] = "test";

  std::ofstream index(dir / "index.csv", std::ios::binary);
  index << "beat_id,file,split\n";
  for (std::size_t i = 0; i < ds.beats.size(); ++i) {
    const BeatRecord& b = ds.beats[i];
    const std::string stem = beat_stem(b.beat_id);
    {
      std::ofstream bin(dir / (stem + ".f64"), std::ios::binary);
      write_f64_le(bin, b.egm.data(), static_cast<std::size_t>(b.egm.size()));
      write_f64_le(bin, b.ecg.data(), static_cast<std::size_t>(b.ecg.size()));
    }
    nlohmann::ordered_json hdr;
    hdr["beat_id"] = b.beat_id;
    hdr["patient_id"] = b.patient_id;
    hdr["sample_rate_hz"] = sample_rate_hz;
    hdr["dtype"] = "f64le";
    hdr["layout"] = "row-major, egm rows then ecg rows";
    hdr["egm_shape"] = {b.egm.rows(), b.egm.cols()};
    hdr["ecg_shape"] = {b.ecg.rows(), b.ecg.cols()};
    std::vector<std::string> names;
    for (Eigen::Index m = 0; m < b.egm.rows(); ++m) names.push_back("EGM" + std::to_string(m + 1));
    for (Eigen::Index m = 0; m < b.ecg.rows(); ++m)
      names.push_back(m < kEcgChannels ? kEcgNames[m] : "ECG" + std::to_string(m + 1));
    hdr["channels"] = names;
    std::ofstream(dir / (stem + ".json"), std::ios::binary) << hdr.dump(2) << "\n";
    index << b.beat_id << "," << stem << ".f64," << split[i] << "\n";
  }
}

Dataset read_beat_directory(const fs::path& dir) {
  std::ifstream index(dir / "index.csv");
  if (!index) throw std::runtime_error("beat directory has no index.csv: " + dir.string());
  Dataset ds;
  std::string line;
  std::getline(index, line);  // header
  while (std::getline(index, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id_s, file, split;
    std::getline(ss, id_s, ',');
    std::getline(ss, file, ',');
    std::getline(ss, split, ',');

    const fs::path bin_path = dir / file;
    fs::path hdr_path = bin_path;
    hdr_path.replace_extension(".json");
    std::ifstream hdr_in(hdr_path);
    if (!hdr_in) throw std::runtime_error("missing beat header " + hdr_path.string());
    const auto hdr = nlohmann::json::parse(hdr_in);

    BeatRecord b;
    b.beat_id = hdr.at("beat_id").get<std::int64_t>();
    b.patient_id = hdr.at("patient_id").get<std::int64_t>();
    const auto es = hdr.at("egm_shape").get<std::vector<Eigen::Index>>();
    const auto cs = hdr.at("ecg_shape").get<std::vector<Eigen::Index>>();
    if (es.size() != 2 || cs.size() != 2) throw ShapeError("bad shape in " + hdr_path.string());
    b.egm.resize(es[0], es[1]);
    b.ecg.resize(cs[0], cs[1]);
    std::ifstream bin(bin_path, std::ios::binary);
    if (!bin) throw std::runtime_error("missing beat data " + bin_path.string());
    read_f64_le(bin, b.egm.data(), static_cast<std::size_t>(b.egm.size()));
    read_f64_le(bin, b.ecg.data(), static_cast<std::size_t>(b.ecg.size()));

    const std::size_t pos = ds.beats.size();
    if (split == "train") ds.train.push_back(pos);
    if (split == "test") ds.test.push_back(pos);
    ds.beats.push_back(std::move(b));
  }
  return ds;
}

}  // namespace cosearch::sigproc
