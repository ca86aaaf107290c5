#include "coretherm/serialize.hpp"

#include <array>
#include <cmath>
#include <fstream>

namespace coretherm {

using nlohmann::json;

std::uint32_t crc32(const std::string& data) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k)
        c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t c = 0xFFFFFFFFu;
  for (unsigned char ch : data) c = table[(c ^ ch) & 0xFFu] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

void save_model_json(const std::string& path, const std::string& kind,
                     const json& payload) {
  const std::string body = payload.dump();
  json header = {{"format", "coretherm"},
                 {"kind", kind},
                 {"version", kModelFormatVersion},
                 {"crc32", crc32(body)},
                 {"bytes", body.size()}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << header.dump() << '\n' << body;
  if (!out) throw DataError("write failed: " + path);
}

json load_model_json(const std::string& path, const std::string& expected_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  std::string header_line;
  if (!std::getline(in, header_line))
    throw ChecksumError("model file is empty: " + path);
  json header;
  try {
    header = json::parse(header_line);
  } catch (const json::exception& e) {
    throw ChecksumError("model file header is corrupt: " + path);
  }
  if (header.value("format", "") != "coretherm")
    throw DataError("not a coretherm model file: " + path);
  const int version = header.value("version", -1);
  if (version != kModelFormatVersion)
    throw DataError("unsupported model format version " +
                    std::to_string(version) + " in " + path + " (expected " +
                    std::to_string(kModelFormatVersion) + ")");
  const std::string kind = header.value("kind", "");
  if (!expected_kind.empty() && kind != expected_kind)
    throw DataError("model file " + path + " holds '" + kind +
                    "', expected '" + expected_kind + "'");

  const auto bytes = header.at("bytes").get<std::size_t>();
  std::string body(bytes, '\0');
  in.read(body.data(), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes)
    throw ChecksumError("model file truncated: " + path);
  if (crc32(body) != header.at("crc32").get<std::uint32_t>())
    throw ChecksumError("model file checksum mismatch: " + path);
  try {
    return json::parse(body);
  } catch (const json::exception&) {
    throw ChecksumError("model payload is corrupt: " + path);
  }
}

namespace {

json vec_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vec_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

json mat_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd mat_from_json(const json& j) {
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols =
      rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = j.at(static_cast<std::size_t>(r))
                    .at(static_cast<std::size_t>(c))
                    .get<double>();
  return m;
}

}  // namespace

json power_model_to_json(const PowerModel& m) {
  return {{"alpha", vec_to_json(m.alpha)},
          {"beta", vec_to_json(m.beta)},
          {"intercept", m.intercept},
          {"n_cores", m.n_cores},
          {"deficient_columns", m.deficient_columns}};
}

PowerModel power_model_from_json(const json& j) {
  PowerModel m;
  const Eigen::VectorXd alpha = vec_from_json(j.at("alpha"));
  m.alpha << alpha(0), alpha(1);
  m.beta = vec_from_json(j.at("beta"));
  m.intercept = j.at("intercept").get<double>();
  m.n_cores = j.at("n_cores").get<int>();
  m.deficient_columns =
      j.value("deficient_columns", std::vector<std::string>{});
  return m;
}

json arx_model_to_json(const ArxModel& m) {
  return {{"order_n", m.order_n},
          {"n_cores", m.n_cores},
          {"a", vec_to_json(m.a)},
          {"b", mat_to_json(m.b)},
          {"sigma_w2", m.sigma_w2},
          {"sigma_v2", m.sigma_v2},
          {"variance_clamped", m.variance_clamped},
          {"variance_separable", m.variance_separable},
          {"temp_mean", m.temp_mean},
          {"power_means", vec_to_json(m.power_means)}};
}

ArxModel arx_model_from_json(const json& j) {
  ArxModel m;
  m.order_n = j.at("order_n").get<int>();
  m.n_cores = j.at("n_cores").get<int>();
  m.a = vec_from_json(j.at("a"));
  m.b = mat_from_json(j.at("b"));
  m.sigma_w2 = j.at("sigma_w2").get<double>();
  m.sigma_v2 = j.at("sigma_v2").get<double>();
  m.variance_clamped = j.at("variance_clamped").get<bool>();
  m.variance_separable = j.at("variance_separable").get<bool>();
  m.temp_mean = j.at("temp_mean").get<double>();
  m.power_means = vec_from_json(j.at("power_means"));
  return m;
}

json ident_diagnostics_to_json(const IdentDiagnostics& d) {
  json re = json::array(), im = json::array(), rho = json::array();
  for (const auto& p : d.poles) {
    re.push_back(p.real());
    im.push_back(p.imag());
  }
  for (double r : d.residual_autocorr) rho.push_back(r);
  // JSON cannot carry infinities; saturate the condition number.
  const double cond = std::isfinite(d.cond_r) ? d.cond_r : 1e18;
  return {{"poles_re", re},     {"poles_im", im},
          {"resid_autocorr", rho}, {"cond_r", cond},
          {"min_sv_r", d.min_sv_r}, {"sigma_w", d.sigma_w},
          {"sigma_v", d.sigma_v}};
}

IdentDiagnostics ident_diagnostics_from_json(const json& j) {
  IdentDiagnostics d;
  const auto& re = j.at("poles_re");
  const auto& im = j.at("poles_im");
  for (std::size_t i = 0; i < re.size(); ++i)
    d.poles.emplace_back(re.at(i).get<double>(), im.at(i).get<double>());
  const auto& rho = j.at("resid_autocorr");
  for (std::size_t i = 0; i < 4 && i < rho.size(); ++i)
    d.residual_autocorr[i] = rho.at(i).get<double>();
  d.cond_r = j.at("cond_r").get<double>();
  d.min_sv_r = j.at("min_sv_r").get<double>();
  d.sigma_w = j.at("sigma_w").get<double>();
  d.sigma_v = j.at("sigma_v").get<double>();
  return d;
}

}  // namespace coretherm
