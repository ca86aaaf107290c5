#include <filesystem>
#include <fstream>

#include "coretherm/serialize.hpp"
#include "doctest.h"

using namespace coretherm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("coretherm_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
  static inline int counter = 0;
};

}  // namespace

TEST_SUITE("serialize") {

TEST_CASE("crc32 reference values") {
  CHECK(crc32("") == 0u);
  CHECK(crc32("123456789") == 0xCBF43926u);  // the classic check value
}

TEST_CASE("power model round-trips losslessly") {
  TempDir dir;
  PowerModel m;
  m.n_cores = 3;
  m.alpha << 7.25, -1.875;
  m.beta.resize(3);
  m.beta << 12.0e0, 13.3333333333333333, 1.0 / 3.0;
  m.intercept = 10.116341923847561;
  m.deficient_columns = {"core_1_freq_c0"};
  save_model_json(dir.file("pm.json"), "power_model", power_model_to_json(m));
  const PowerModel back = power_model_from_json(
      load_model_json(dir.file("pm.json"), "power_model"));
  CHECK(back.intercept == m.intercept);
  CHECK((back.beta - m.beta).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.alpha - m.alpha).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.deficient_columns == m.deficient_columns);
}

TEST_CASE("arx model round-trips losslessly") {
  TempDir dir;
  ArxModel m;
  m.order_n = 2;
  m.n_cores = 2;
  m.a.resize(2);
  m.a << -1.8123456789012345, 0.8198765432109876;
  m.b.resize(3, 2);
  m.b << 0.001, 0.0005, 0.003, 0.0011, 0.0002, 0.0001;
  m.sigma_w2 = 0.0123456789;
  m.sigma_v2 = 1.0 / 12.0;
  m.temp_mean = 47.3330078125;
  m.power_means.resize(3);
  m.power_means << 9.5, 6.25, 7.125;
  m.variance_clamped = true;
  save_model_json(dir.file("arx.json"), "arx_model", arx_model_to_json(m));
  const ArxModel back =
      arx_model_from_json(load_model_json(dir.file("arx.json"), "arx_model"));
  CHECK((back.a - m.a).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.b - m.b).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.sigma_v2 == m.sigma_v2);
  CHECK(back.sigma_w2 == m.sigma_w2);
  CHECK(back.temp_mean == m.temp_mean);
  CHECK(back.variance_clamped == m.variance_clamped);
}

TEST_CASE("truncated file raises a checksum error") {
  TempDir dir;
  PowerModel m;
  m.n_cores = 1;
  m.beta = Eigen::VectorXd::Constant(1, 12.5);
  save_model_json(dir.file("t.json"), "power_model", power_model_to_json(m));

  // Chop the payload.
  std::ifstream in(dir.file("t.json"), std::ios::binary);
  std::string all((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  in.close();
  std::ofstream out(dir.file("t.json"), std::ios::binary | std::ios::trunc);
  out.write(all.data(), static_cast<std::streamsize>(all.size() - 10));
  out.close();

  CHECK_THROWS_AS(
      static_cast<void>(load_model_json(dir.file("t.json"), "power_model")),
      ChecksumError);
}

TEST_CASE("corrupted payload raises a checksum error") {
  TempDir dir;
  PowerModel m;
  m.n_cores = 1;
  m.beta = Eigen::VectorXd::Constant(1, 12.5);
  save_model_json(dir.file("c.json"), "power_model", power_model_to_json(m));
  std::fstream f(dir.file("c.json"),
                 std::ios::binary | std::ios::in | std::ios::out);
  f.seekp(-4, std::ios::end);
  f.put('X');
  f.close();
  CHECK_THROWS_AS(
      static_cast<void>(load_model_json(dir.file("c.json"), "power_model")),
      ChecksumError);
}

TEST_CASE("older version field raises an unsupported-version error") {
  TempDir dir;
  const std::string body = "{}";
  nlohmann::json header = {{"format", "coretherm"},
                           {"kind", "power_model"},
                           {"version", 0},
                           {"crc32", crc32(body)},
                           {"bytes", body.size()}};
  std::ofstream out(dir.file("old.json"), std::ios::binary);
  out << header.dump() << '\n' << body;
  out.close();
  CHECK_THROWS_WITH_AS(
      static_cast<void>(load_model_json(dir.file("old.json"), "power_model")),
      doctest::Contains("version"), DataError);
}

TEST_CASE("wrong kind is rejected") {
  TempDir dir;
  PowerModel m;
  m.n_cores = 1;
  m.beta = Eigen::VectorXd::Constant(1, 10.0);
  save_model_json(dir.file("k.json"), "power_model", power_model_to_json(m));
  CHECK_THROWS_AS(
      static_cast<void>(load_model_json(dir.file("k.json"), "arx_model")),
      DataError);
}

TEST_CASE("diagnostics serialize with saturated condition numbers") {
  IdentDiagnostics d;
  d.poles = {{0.91, 0.0}, {0.84, 0.0}};
  d.residual_autocorr = {0.01, 0.02, -0.03, 0.0};
  d.cond_r = std::numeric_limits<double>::infinity();
  d.min_sv_r = 1e-14;
  d.sigma_w = 0.1;
  d.sigma_v = 0.3;
  const IdentDiagnostics back =
      ident_diagnostics_from_json(ident_diagnostics_to_json(d));
  CHECK(back.cond_r == 1e18);
  CHECK(back.poles.size() == 2);
  CHECK(back.poles[1].real() == 0.84);
  CHECK(back.residual_autocorr[2] == -0.03);
}

}  // TEST_SUITE
