#include "dpmix/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace dpmix {
namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, long line) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && *b == ' ') ++b;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e || b == e)
    throw ParseError("csv line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

}  // namespace

void write_csv(std::ostream& out, const Dataset& ds) {
  const Eigen::Index d = ds.dim();
  for (Eigen::Index j = 0; j < d; ++j) out << (j ? "," : "") << 'x' << j;
  if (ds.has_labels()) out << ",label";
  out << '\n';
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) out << (j ? "," : "") << fmt(ds.points(i, j));
    if (ds.has_labels()) out << ',' << ds.labels[i];
    out << '\n';
  }
}

Dataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("csv: empty input");
  const auto head = split_commas(line);
  bool labelled = !head.empty() && head.back() == "label";
  const std::size_t d = head.size() - (labelled ? 1 : 0);
  if (d == 0) throw ParseError("csv: no coordinate columns");
  for (std::size_t j = 0; j < d; ++j)
    if (head[j] != "x" + std::to_string(j))
      throw ParseError("csv header: expected x" + std::to_string(j) + ", got '" + head[j] + "'");
  std::vector<double> vals;
  std::vector<int> labels;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_commas(line);
    if (cells.size() != head.size())
      throw ParseError("csv line " + std::to_string(lineno) + ": expected " + std::to_string(head.size()) +
                       " fields, got " + std::to_string(cells.size()));
    for (std::size_t j = 0; j < d; ++j) vals.push_back(parse_double(cells[j], lineno));
    if (labelled) {
      const double lab = parse_double(cells[d], lineno);
      if (lab < 1 || lab != static_cast<int>(lab))
        throw ParseError("csv line " + std::to_string(lineno) + ": label must be a positive integer");
      labels.push_back(static_cast<int>(lab));
    }
  }
  Dataset ds;
  const Eigen::Index n = static_cast<Eigen::Index>(vals.size() / d);
  ds.points = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      vals.data(), n, static_cast<Eigen::Index>(d));
  ds.labels = std::move(labels);
  return ds;
}

void save_csv(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_csv(out, ds);
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path);
  return read_csv(in);
}

nlohmann::json mixture_to_json(const Mixture& m) {
  nlohmann::json j;
  j["d"] = m.dim();
  j["k"] = m.k();
  j["components"] = nlohmann::json::array();
  for (const auto& c : m.components) {
    nlohmann::json cj;
    cj["mean"] = std::vector<double>(c.mean.data(), c.mean.data() + c.mean.size());
    if (c.spherical) {
      cj["sigma2"] = c.covariance(0, 0);
    } else {
      nlohmann::json rows = nlohmann::json::array();
      for (Eigen::Index r = 0; r < c.covariance.rows(); ++r) {
        std::vector<double> row(c.covariance.cols());
        for (Eigen::Index s = 0; s < c.covariance.cols(); ++s) row[s] = c.covariance(r, s);
        rows.push_back(row);
      }
      cj["covariance"] = rows;
    }
    cj["weight"] = c.weight;
    j["components"].push_back(cj);
  }
  return j;
}

Mixture mixture_from_json(const nlohmann::json& j) {
  try {
    Mixture m;
    const Eigen::Index d = j.at("d").get<Eigen::Index>();
    const int k = j.at("k").get<int>();
    for (const auto& cj : j.at("components")) {
      const auto mean = cj.at("mean").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(mean.size()) != d) throw ShapeError("model json: mean length != d");
      Component c;
      c.mean = Eigen::Map<const Vec>(mean.data(), d);
      c.weight = cj.at("weight").get<double>();
      if (cj.contains("sigma2")) {
        c.covariance = Mat::Identity(d, d) * cj.at("sigma2").get<double>();
        c.spherical = true;
      } else {
        const auto rows = cj.at("covariance").get<std::vector<std::vector<double>>>();
        if (static_cast<Eigen::Index>(rows.size()) != d) throw ShapeError("model json: covariance shape");
        c.covariance.resize(d, d);
        for (Eigen::Index r = 0; r < d; ++r) {
          if (static_cast<Eigen::Index>(rows[r].size()) != d) throw ShapeError("model json: covariance shape");
          for (Eigen::Index s = 0; s < d; ++s) c.covariance(r, s) = rows[r][s];
        }
      }
      m.components.push_back(std::move(c));
    }
    if (m.k() != k) throw ShapeError("model json: k does not match component count");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model json: ") + e.what());
  }
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void save_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

}  // namespace dpmix
