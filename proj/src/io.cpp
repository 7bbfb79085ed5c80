#include "fwq/io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fwq/errors.hpp"

namespace fwq {

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, std::string_view content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot write " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw InvalidInput("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ';';
    if constexpr (std::is_same_v<T, double>) out += fmt(v[i]);
    else out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

std::string trace_to_csv(const TrainingTrace& t) {
  std::string out;
  out += "# h_steps=" + fmt(t.h_steps) + "\n";
  out += "# m_batch=" + fmt(t.m_batch) + "\n";
  out += "# pi=" + join(t.pi) + "\n";
  out += "# q_bits=" + join(t.q_bits) + "\n";
  out += "# weight_scale=" + fmt(t.weight_scale) + "\n";
  out += "round,loss,grad_norm_sq,accuracy,energy_j\n";
  for (std::size_t r = 0; r < t.rounds(); ++r) {
    out += std::to_string(r) + "," + fmt(t.loss[r]) + "," + fmt(t.grad_norm_sq[r]) + "," +
           fmt(t.accuracy[r]) + "," + fmt(t.energy_j[r]) + "\n";
  }
  return out;
}

TrainingTrace trace_from_csv(const std::string& content) {
  TrainingTrace t;
  std::istringstream in(content);
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      key.erase(std::remove(key.begin(), key.end(), ' '), key.end());
      const std::string val = line.substr(eq + 1);
      if (key == "h_steps") t.h_steps = std::stod(val);
      else if (key == "m_batch") t.m_batch = std::stod(val);
      else if (key == "weight_scale") t.weight_scale = std::stod(val);
      else if (key == "pi" || key == "q_bits") {
        std::istringstream vs(val);
        std::string item;
        while (std::getline(vs, item, ';')) {
          if (item.empty()) continue;
          if (key == "pi") t.pi.push_back(std::stod(item));
          else t.q_bits.push_back(std::stoi(item));
        }
      }
      continue;
    }
    if (!header_seen) {  // column header row
      header_seen = true;
      continue;
    }
    std::istringstream row(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(row, cell, ',')) cells.push_back(std::stod(cell));
    if (cells.size() != 5) throw InvalidInput("malformed trace row: " + line);
    t.loss.push_back(cells[1]);
    t.grad_norm_sq.push_back(cells[2]);
    t.accuracy.push_back(cells[3]);
    t.energy_j.push_back(cells[4]);
  }
  return t;
}

std::string sweep_to_csv(const SweepResult& r) {
  std::size_t max_n = 0;
  for (const auto& row : r.rows) max_n = std::max(max_n, row.q.size());
  std::string out = "sweep_value,seed,strategy,objective_j,h,k_rounds,eps_q,feasible";
  for (std::size_t i = 0; i < max_n; ++i) out += ",q_" + std::to_string(i);
  for (std::size_t i = 0; i < max_n; ++i) out += ",b_hz_" + std::to_string(i);
  out += "\n";
  for (const auto& row : r.rows) {
    out += fmt(row.sweep_value) + "," + std::to_string(row.seed) + "," + to_string(row.strategy) +
           "," + fmt(row.objective_j) + "," + fmt(row.h) + "," + fmt(row.k_rounds) + "," +
           fmt(row.eps_q) + "," + (row.feasible ? "1" : "0");
    for (std::size_t i = 0; i < max_n; ++i)
      out += "," + (i < row.q.size() ? std::to_string(row.q[i]) : std::string());
    for (std::size_t i = 0; i < max_n; ++i)
      out += "," + (i < row.b_hz.size() ? fmt(row.b_hz[i]) : std::string());
    out += "\n";
  }
  return out;
}

}  // namespace fwq
