#include "tethersim/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tethersim/errors.hpp"

namespace tethersim {

namespace {

void put(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

void put(std::string& out, const Vec3& v) {
  put(out, v.x());
  out += ',';
  put(out, v.y());
  out += ',';
  put(out, v.z());
}

void put(std::string& out, const std::optional<Vec3>& v) {
  if (v)
    put(out, *v);
  else
    out += ",,";
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  size_t from = 0;
  while (true) {
    const size_t comma = line.find(',', from);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(from));
      return fields;
    }
    fields.push_back(line.substr(from, comma - from));
    from = comma + 1;
  }
}

class RowReader {
 public:
  RowReader(const std::vector<std::string>& fields, const std::string& origin,
            size_t line)
      : fields_(fields), origin_(origin), line_(line) {}

  double number() {
    const std::string& field = next();
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end == field.c_str() || *end != '\0')
      fail("expected a number, got '" + field + "'");
    return v;
  }

  int integer() { return static_cast<int>(number()); }

  Vec3 vec() {
    Vec3 v;
    v.x() = number();
    v.y() = number();
    v.z() = number();
    return v;
  }

  std::optional<double> maybe_number() {
    if (peek_empty()) {
      ++at_;
      return std::nullopt;
    }
    return number();
  }

  std::optional<Vec3> maybe_vec() {
    if (peek_empty()) {
      if (at_ + 3 > fields_.size() || !fields_[at_ + 1].empty() ||
          !fields_[at_ + 2].empty())
        fail("vector fields must be all present or all empty");
      at_ += 3;
      return std::nullopt;
    }
    return vec();
  }

 private:
  const std::string& next() {
    if (at_ >= fields_.size()) fail("row is short");
    return fields_[at_++];
  }

  bool peek_empty() const {
    return at_ < fields_.size() && fields_[at_].empty();
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(origin_ + " line " + std::to_string(line_) + ": " + what);
  }

  const std::vector<std::string>& fields_;
  std::string origin_;
  size_t line_;
  size_t at_ = 0;
};

std::string svg_head(double width, double height) {
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
      << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  return out.str();
}

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Axis {
  double lo = 0.0, hi = 1.0;    // data range
  double from = 0.0, to = 1.0;  // pixel range

  double map(double v) const {
    const double span = hi - lo;
    const double s = span > 0.0 ? (v - lo) / span : 0.5;
    return from + s * (to - from);
  }
};

void polyline(std::ostringstream& out, const Axis& x, const Axis& y,
              const std::vector<std::pair<double, double>>& pts,
              const std::string& color) {
  if (pts.empty()) return;
  out << "<polyline fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"1.2\" points=\"";
  for (const auto& [px, py] : pts)
    out << fmt6(x.map(px)) << "," << fmt6(y.map(py)) << " ";
  out << "\"/>\n";
}

}  // namespace

std::string csv_header(int links) {
  std::string out = "t";
  for (int i = 1; i <= links; ++i) {
    const std::string k = std::to_string(i);
    out += ",q" + k + "x,q" + k + "y,q" + k + "z";
  }
  for (int i = 1; i <= links; ++i) {
    const std::string k = std::to_string(i);
    out += ",w" + k + "x,w" + k + "y,w" + k + "z";
  }
  for (int r = 1; r <= 3; ++r)
    for (int c = 1; c <= 3; ++c)
      out += ",R" + std::to_string(r) + std::to_string(c);
  out += ",Om1,Om2,Om3,f,M1,M2,M3,ux,uy,uz,T";
  out += ",eq_x,eq_y,eq_z,ew_x,ew_y,ew_z,eR_x,eR_y,eR_z,eW_x,eW_y,eW_z";
  out += ",ex_x,ex_y,ex_z,phase";
  return out;
}

std::string trajectory_csv(const Trajectory& traj) {
  traj.validate();
  std::string out = csv_header(traj.n);
  out += '\n';
  for (const TrajectorySample& s : traj.samples) {
    put(out, s.t);
    for (const Vec3& q : s.q) {
      out += ',';
      put(out, q);
    }
    for (const Vec3& w : s.omega) {
      out += ',';
      put(out, w);
    }
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        out += ',';
        put(out, s.R(r, c));
      }
    out += ',';
    put(out, s.Omega);
    out += ',';
    put(out, s.f);
    out += ',';
    put(out, s.moment);
    out += ',';
    put(out, s.u);
    out += ',';
    if (s.tension) put(out, *s.tension);
    out += ',';
    put(out, s.log.e_q);
    out += ',';
    put(out, s.log.e_omega);
    out += ',';
    put(out, s.log.e_R);
    out += ',';
    put(out, s.log.e_Omega);
    out += ',';
    put(out, s.log.e_x);
    out += ',' + std::to_string(s.log.phase) + '\n';
  }
  return out;
}

Trajectory parse_trajectory_csv(const std::string& text,
                                const std::string& origin) {
  std::istringstream stream(text);
  std::string line;
  if (!std::getline(stream, line))
    throw ConfigError(origin + ": empty trajectory file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const size_t columns = split_fields(line).size();
  // 6 per link plus 37 fixed columns
  if (columns < 43 || (columns - 37) % 6 != 0)
    throw ConfigError(origin + ": header has " + std::to_string(columns) +
                      " columns, not a trajectory layout");
  const int links = static_cast<int>((columns - 37) / 6);
  if (line != csv_header(links))
    throw ConfigError(origin + ": header does not match the " +
                      std::to_string(links) + "-link schema");

  Trajectory traj;
  traj.n = links;
  size_t number = 1;
  while (std::getline(stream, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != columns)
      throw ConfigError(origin + " line " + std::to_string(number) + ": has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(columns));
    RowReader row(fields, origin, number);
    TrajectorySample s;
    s.t = row.number();
    for (int i = 0; i < links; ++i) s.q.push_back(row.vec());
    for (int i = 0; i < links; ++i) s.omega.push_back(row.vec());
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) s.R(r, c) = row.number();
    s.Omega = row.vec();
    s.f = row.number();
    s.moment = row.vec();
    s.u = row.vec();
    s.tension = row.maybe_number();
    s.log.e_q = row.maybe_vec();
    s.log.e_omega = row.maybe_vec();
    s.log.e_R = row.maybe_vec();
    s.log.e_Omega = row.maybe_vec();
    s.log.e_x = row.maybe_vec();
    s.log.phase = row.integer();
    traj.samples.push_back(std::move(s));
  }
  if (traj.samples.size() < 2)
    throw ConfigError(origin + ": needs at least two rows");
  traj.dt = traj.samples[1].t - traj.samples[0].t;
  traj.validate();
  return traj;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ConfigError("write to '" + path + "' failed");
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  write_text(path, trajectory_csv(traj));
}

Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw ConfigError("cannot open trajectory '" + path + "'");
  std::ostringstream text;
  text << file.rdbuf();
  return parse_trajectory_csv(text.str(), path);
}

std::string metrics_json(const std::string& name, const RunMetrics& metrics,
                         const std::optional<AuditReport>& audit) {
  nlohmann::ordered_json doc;
  doc["scenario"] = name;
  nlohmann::ordered_json m;
  const auto set = [&m](const char* key, const std::optional<double>& v) {
    if (v) m[key] = *v;
  };
  set("final_e_q", metrics.final_e_q);
  set("final_e_omega", metrics.final_e_omega);
  set("final_e_R", metrics.final_e_R);
  set("final_e_Omega", metrics.final_e_Omega);
  set("final_e_x", metrics.final_e_x);
  set("max_tension_error", metrics.max_tension_error);
  set("decay_rate", metrics.decay_rate);
  set("final_position_rel", metrics.final_position_rel);
  if (!metrics.vibration.empty()) {
    m["vibration"] = metrics.vibration;
    m["vibration_index"] = metrics.vibration_index;
  }
  m["max_thrust"] = metrics.max_thrust;
  doc["metrics"] = m;
  if (audit) {
    nlohmann::ordered_json a;
    a["max_constraint_drift"] = audit->max_constraint_drift;
    a["energy_drift_rel"] = audit->energy_drift_rel;
    a["max_el_residual"] = audit->max_el_residual;
    a["bound_violations"] = audit->bound_violations;
    doc["audit"] = a;
  }
  return doc.dump(2) + "\n";
}

std::string errors_svg(const Trajectory& traj) {
  const double width = 720, height = 400;
  struct Series {
    const char* label;
    const char* color;
    std::vector<std::pair<double, double>> pts;
  };
  Series series[] = {{"|e_q|", "#c0392b", {}},
                     {"|e_R|", "#2980b9", {}},
                     {"|e_x|", "#27ae60", {}}};
  double t_hi = 0.0, y_hi = 0.0;
  for (const TrajectorySample& s : traj.samples) {
    t_hi = std::max(t_hi, s.t);
    const std::optional<Vec3>* vecs[] = {&s.log.e_q, &s.log.e_R, &s.log.e_x};
    for (int i = 0; i < 3; ++i) {
      if (!*vecs[i]) continue;
      const double norm = (*vecs[i])->norm();
      series[i].pts.emplace_back(s.t, norm);
      y_hi = std::max(y_hi, norm);
    }
  }
  const Axis x{0.0, std::max(t_hi, 1e-9), 60.0, width - 20.0};
  const Axis y{0.0, std::max(y_hi, 1e-9), height - 40.0, 20.0};

  std::ostringstream out;
  out << svg_head(width, height);
  out << "<line x1=\"60\" y1=\"20\" x2=\"60\" y2=\"" << height - 40
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"60\" y1=\"" << height - 40 << "\" x2=\"" << width - 20
      << "\" y2=\"" << height - 40 << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"" << height - 10
      << "\" font-size=\"12\">t [s]</text>\n";
  out << "<text x=\"8\" y=\"16\" font-size=\"12\">error norm (max "
      << fmt6(y_hi) << ")</text>\n";
  double legend_y = 34.0;
  for (const Series& s : series) {
    if (s.pts.empty()) continue;
    polyline(out, x, y, s.pts, s.color);
    out << "<text x=\"70\" y=\"" << fmt6(legend_y) << "\" font-size=\"12\" fill=\""
        << s.color << "\">" << s.label << "</text>\n";
    legend_y += 16.0;
  }
  out << "</svg>\n";
  return out.str();
}

std::string chain_svg(const SystemParams& params, const Trajectory& traj) {
  const double width = 520, height = 520;
  const double reach = params.total_length();
  // plot (x, -z): gravity points along +z, so height is -z
  const Axis x{-reach, reach, 20.0, width - 20.0};
  const Axis y{-reach, reach, height - 20.0, 20.0};

  std::ostringstream out;
  out << svg_head(width, height);
  out << "<circle cx=\"" << fmt6(x.map(0)) << "\" cy=\"" << fmt6(y.map(0))
      << "\" r=\"3\" fill=\"black\"/>\n";

  const size_t count = traj.samples.size();
  const size_t shapes = std::min<size_t>(count, 12);
  for (size_t k = 0; k < shapes; ++k) {
    const size_t at = shapes < 2 ? 0 : k * (count - 1) / (shapes - 1);
    const TrajectorySample& s = traj.samples[at];
    ChainState chain;
    for (size_t i = 0; i < s.q.size(); ++i) {
      chain.q.push_back(UnitVector3::normalized(s.q[i]));
      chain.omega.push_back(s.omega[i]);
    }
    const std::vector<Vec3> joints = positions(params, chain);
    const double opacity = 0.25 + 0.75 * (shapes < 2 ? 1.0 : double(k) / (shapes - 1));
    out << "<polyline fill=\"none\" stroke=\"#34495e\" stroke-opacity=\""
        << fmt6(opacity) << "\" stroke-width=\"1.5\" points=\""
        << fmt6(x.map(0)) << "," << fmt6(y.map(0)) << " ";
    for (const Vec3& p : joints)
      out << fmt6(x.map(p.x())) << "," << fmt6(y.map(-p.z())) << " ";
    out << "\"/>\n";
  }
  out << "<text x=\"10\" y=\"16\" font-size=\"12\">chain in the x-height "
         "plane, light to dark in time</text>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace tethersim
