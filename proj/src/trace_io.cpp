#include "wifislam/trace_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "wifislam/errors.hpp"
#include "wifislam/hash.hpp"

namespace wifislam {

namespace {

using nlohmann::json;

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string::size_type start = 0;
  while (true) {
    const std::string::size_type comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

// Common CSV scaffolding: validates the header, hands each split row to
// on_row with its 1-based line number.
template <typename RowFn>
void read_csv(const std::filesystem::path& path, const std::string& header,
              std::size_t num_fields, RowFn&& on_row) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open for reading");
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != header) {
    throw DataError(path.string() + ": expected header '" + header + "'");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv(line);
    if (fields.size() != num_fields) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": expected " + std::to_string(num_fields) +
                      " fields, got " + std::to_string(fields.size()));
    }
    on_row(fields, line_no);
  }
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  return out;
}

double field_double(const std::vector<std::string>& fields, std::size_t idx,
                    const std::filesystem::path& path, std::size_t line_no) {
  return parse_double_field(fields[idx], path.string() + ":" +
                                             std::to_string(line_no) +
                                             ": field " + std::to_string(idx));
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const std::to_chars_result r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

double parse_double_field(const std::string& text, const std::string& context) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const std::from_chars_result r = std::from_chars(first, last, v);
  if (r.ec != std::errc() || r.ptr != last || text.empty()) {
    throw DataError(context + ": not a number: '" + text + "'");
  }
  return v;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw DataError(path.string() + ": write failed");
}

void write_trajectory_csv(const std::filesystem::path& path,
                          const std::vector<TimedPose>& rows) {
  std::ofstream out = open_for_write(path);
  out << "t,x,y,z,qx,qy,qz,qw\n";
  for (const TimedPose& r : rows) {
    out << format_double(r.t) << ',' << format_double(r.pose.t.x()) << ','
        << format_double(r.pose.t.y()) << ',' << format_double(r.pose.t.z())
        << ',' << format_double(r.pose.q.x()) << ','
        << format_double(r.pose.q.y()) << ',' << format_double(r.pose.q.z())
        << ',' << format_double(r.pose.q.w()) << '\n';
  }
}

std::vector<TimedPose> read_trajectory_csv(const std::filesystem::path& path) {
  std::vector<TimedPose> rows;
  read_csv(path, "t,x,y,z,qx,qy,qz,qw", 8,
           [&](const std::vector<std::string>& f, std::size_t n) {
             TimedPose r;
             r.t = field_double(f, 0, path, n);
             r.pose.t = Eigen::Vector3d(field_double(f, 1, path, n),
                                        field_double(f, 2, path, n),
                                        field_double(f, 3, path, n));
             r.pose.q = Eigen::Quaterniond(field_double(f, 7, path, n),
                                           field_double(f, 4, path, n),
                                           field_double(f, 5, path, n),
                                           field_double(f, 6, path, n));
             rows.push_back(std::move(r));
           });
  return rows;
}

void write_odometry_csv(const std::filesystem::path& path,
                        const std::vector<OdomRecord>& rows) {
  std::ofstream out = open_for_write(path);
  out << "t,dtx,dty,dtz,drx,dry,drz\n";
  for (const OdomRecord& r : rows) {
    out << format_double(r.t);
    for (int i = 0; i < 3; ++i) out << ',' << format_double(r.z.dt[i]);
    for (int i = 0; i < 3; ++i) out << ',' << format_double(r.z.dr[i]);
    out << '\n';
  }
}

std::vector<OdomRecord> read_odometry_csv(const std::filesystem::path& path) {
  std::vector<OdomRecord> rows;
  read_csv(path, "t,dtx,dty,dtz,drx,dry,drz", 7,
           [&](const std::vector<std::string>& f, std::size_t n) {
             OdomRecord r;
             r.t = field_double(f, 0, path, n);
             for (int i = 0; i < 3; ++i) {
               r.z.dt[i] = field_double(f, 1 + i, path, n);
               r.z.dr[i] = field_double(f, 4 + i, path, n);
             }
             rows.push_back(std::move(r));
           });
  return rows;
}

void write_bearings_csv(const std::filesystem::path& path,
                        const std::vector<BearingRecord>& rows) {
  std::ofstream out = open_for_write(path);
  out << "t,ap_id,theta_rad,sigma\n";
  for (const BearingRecord& r : rows) {
    out << format_double(r.t) << ',' << r.ap_id << ','
        << format_double(r.theta_rad) << ',' << format_double(r.sigma) << '\n';
  }
}

std::vector<BearingRecord> read_bearings_csv(
    const std::filesystem::path& path) {
  std::vector<BearingRecord> rows;
  read_csv(path, "t,ap_id,theta_rad,sigma", 4,
           [&](const std::vector<std::string>& f, std::size_t n) {
             BearingRecord r;
             r.t = field_double(f, 0, path, n);
             r.ap_id = f[1];
             r.theta_rad = field_double(f, 2, path, n);
             r.sigma = field_double(f, 3, path, n);
             rows.push_back(std::move(r));
           });
  return rows;
}

void write_rssi_csv(const std::filesystem::path& path,
                    const std::vector<RssiRecord>& rows) {
  std::ofstream out = open_for_write(path);
  out << "t,ap_id,rssi\n";
  for (const RssiRecord& r : rows) {
    out << format_double(r.t) << ',' << r.ap_id << ',' << format_double(r.rssi)
        << '\n';
  }
}

std::vector<RssiRecord> read_rssi_csv(const std::filesystem::path& path) {
  std::vector<RssiRecord> rows;
  read_csv(path, "t,ap_id,rssi", 3,
           [&](const std::vector<std::string>& f, std::size_t n) {
             RssiRecord r;
             r.t = field_double(f, 0, path, n);
             r.ap_id = f[1];
             r.rssi = field_double(f, 2, path, n);
             rows.push_back(std::move(r));
           });
  return rows;
}

void write_aps_csv(const std::filesystem::path& path,
                   const std::vector<ApRecord>& rows) {
  std::ofstream out = open_for_write(path);
  out << "ap_id,x,y,z\n";
  for (const ApRecord& r : rows) {
    out << r.ap_id << ',' << format_double(r.position.x()) << ','
        << format_double(r.position.y()) << ','
        << format_double(r.position.z()) << '\n';
  }
}

std::vector<ApRecord> read_aps_csv(const std::filesystem::path& path) {
  std::vector<ApRecord> rows;
  read_csv(path, "ap_id,x,y,z", 4,
           [&](const std::vector<std::string>& f, std::size_t n) {
             ApRecord r;
             r.ap_id = f[0];
             r.position = Eigen::Vector3d(field_double(f, 1, path, n),
                                          field_double(f, 2, path, n),
                                          field_double(f, 3, path, n));
             rows.push_back(std::move(r));
           });
  return rows;
}

void write_csi_jsonl(const std::filesystem::path& path,
                     const std::vector<CsiPacket>& packets) {
  std::ofstream out = open_for_write(path);
  for (const CsiPacket& p : packets) {
    json h = json::array();
    for (Eigen::Index m = 0; m < p.h.rows(); ++m) {
      json row = json::array();
      for (Eigen::Index n = 0; n < p.h.cols(); ++n) {
        row.push_back(json::array({p.h(m, n).real(), p.h(m, n).imag()}));
      }
      h.push_back(std::move(row));
    }
    json j;
    j["t"] = p.timestamp;
    j["ap_id"] = p.ap_id;
    j["rssi"] = p.rssi;
    j["lambda"] = p.lambda;
    j["freqs"] = p.freqs;
    j["H"] = std::move(h);
    out << j.dump() << '\n';
  }
}

std::vector<CsiPacket> read_csi_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open for reading");
  std::vector<CsiPacket> packets;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(where + ": bad JSON: " + e.what());
    }
    try {
      CsiPacket p;
      p.timestamp = j.at("t").get<double>();
      p.ap_id = j.at("ap_id").get<std::string>();
      p.rssi = j.at("rssi").get<double>();
      p.lambda = j.at("lambda").get<double>();
      p.freqs = j.at("freqs").get<std::vector<double>>();
      const json& h = j.at("H");
      if (!h.is_array() || h.empty()) {
        throw DataError(where + ": H must be a nonempty array");
      }
      const std::size_t rows = h.size();
      const std::size_t cols = h[0].size();
      p.h.resize(static_cast<Eigen::Index>(rows),
                 static_cast<Eigen::Index>(cols));
      for (std::size_t m = 0; m < rows; ++m) {
        if (h[m].size() != cols) {
          throw DataError(where + ": ragged H rows");
        }
        for (std::size_t n = 0; n < cols; ++n) {
          const json& entry = h[m][n];
          if (!entry.is_array() || entry.size() != 2) {
            throw DataError(where + ": H entries must be [re,im] pairs");
          }
          p.h(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n)) = {
              entry[0].get<double>(), entry[1].get<double>()};
        }
      }
      packets.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return packets;
}

std::string checksum_file(const std::filesystem::path& path) {
  const std::string bytes = read_text_file(path);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return std::string(buf);
}

void stamp_checksums(const std::filesystem::path& run_dir,
                     RunManifest& manifest) {
  std::error_code ec;
  std::vector<std::filesystem::path> files;
  for (const auto& entry :
       std::filesystem::recursive_directory_iterator(run_dir, ec)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  if (ec) throw DataError(run_dir.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());
  for (const std::filesystem::path& f : files) {
    const std::string rel =
        std::filesystem::relative(f, run_dir).generic_string();
    if (rel == "manifest.json" || rel == "timings.txt") continue;
    // Quarantined leftovers of failed stages stay out of the manifest.
    if (rel.find(".partial") != std::string::npos) continue;
    manifest.checksums[rel] = checksum_file(f);
  }
}

void write_manifest(const std::filesystem::path& run_dir,
                    const RunManifest& manifest) {
  json j;
  j["scenario"] = manifest.scenario;
  j["seed"] = manifest.seed;
  j["versions"] = manifest.versions;
  j["checksums"] = manifest.checksums;
  write_text_file(run_dir / "manifest.json", j.dump(2) + "\n");

  std::string timings;
  for (const auto& [stage, sec] : manifest.timings_sec) {
    timings += stage + "," + format_double(sec) + "\n";
  }
  write_text_file(run_dir / "timings.txt", timings);
}

RunManifest read_manifest(const std::filesystem::path& run_dir) {
  const std::filesystem::path path = run_dir / "manifest.json";
  json j;
  try {
    j = json::parse(read_text_file(path));
    RunManifest m;
    m.scenario = j.at("scenario").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.versions = j.at("versions").get<std::map<std::string, std::string>>();
    m.checksums = j.at("checksums").get<std::map<std::string, std::string>>();
    const std::filesystem::path timings = run_dir / "timings.txt";
    if (std::filesystem::exists(timings)) {
      std::ifstream in(timings);
      std::string line;
      while (std::getline(in, line)) {
        line = strip_cr(line);
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv(line);
        if (f.size() != 2) {
          throw DataError(timings.string() + ": expected 'stage,seconds'");
        }
        m.timings_sec[f[0]] =
            parse_double_field(f[1], timings.string() + ": " + f[0]);
      }
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace wifislam
