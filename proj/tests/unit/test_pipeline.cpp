#include <filesystem>
#include <fstream>

#include "coretherm/csv.hpp"
#include "coretherm/pipeline.hpp"
#include "coretherm/serialize.hpp"
#include "doctest.h"

using namespace coretherm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("coretherm_pipe_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
  static inline int counter = 0;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

SynthStudySpec small_spec(std::uint64_t seed) {
  SynthStudySpec spec;
  spec.n_sockets = 2;
  spec.n_cores = 2;
  spec.window_count = 4;
  spec.window_len = 2048;
  spec.power_train_samples = 1024;
  spec.seed = seed;
  return spec;
}

PipelineConfig small_config(const SynthStudySpec& spec) {
  PipelineConfig cfg;
  cfg.power_train_samples = spec.power_train_samples;
  cfg.window_len = spec.window_len;
  cfg.window_count = spec.window_count;
  cfg.seed = 7;
  cfg.min_corpus = 8;
  return cfg;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("telemetry csv export and ingest round-trip exactly") {
  TempDir dir;
  const SynthStudySpec spec = small_spec(11);
  const SynthStudyData data = gen_synth_study(spec);
  export_telemetry_csv(data.frames, dir.file("tele.csv"));
  const auto frames = ingest_csv_frames(dir.file("tele.csv"));
  REQUIRE(frames.size() == data.frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    CHECK(frames[i].node_id == data.frames[i].node_id);
    CHECK((frames[i].core_temps - data.frames[i].core_temps)
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((frames[i].core_freq_c0 - data.frames[i].core_freq_c0)
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((frames[i].pkg_power - data.frames[i].pkg_power)
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK(frames[i].sample_period ==
          doctest::Approx(data.frames[i].sample_period));
  }
}

TEST_CASE("header-keyed parsing survives a shuffled column order") {
  TempDir dir;
  write_csv(dir.file("shuffled.csv"),
            {"core_temp_c", "node", "pkg_power_w", "core", "ts_epoch_s",
             "socket", "one_minus_c0_pkg", "pkg_freq_c0_mhz", "freq_c0_mhz"},
            {{"50", "n0", "30.5", "0", "100.0", "0", "0.2", "1800", "1200"},
             {"51", "n0", "31.5", "0", "102.0", "0", "0.25", "1810", "1210"},
             {"52", "n0", "32.5", "0", "104.0", "0", "0.3", "1820", "1220"}});
  const TelemetryFrame f = ingest_csv(dir.file("shuffled.csv"));
  CHECK(f.n_cores() == 1);
  CHECK(f.n_samples() == 3);
  CHECK(f.core_temps(0, 1) == 51.0);
  CHECK(f.pkg_power(2) == 32.5);
  CHECK(f.core_freq_c0(0, 0) == 1200.0);
}

TEST_CASE("schema violations carry actionable messages") {
  TempDir dir;
  write_csv(dir.file("missing.csv"),
            {"ts_epoch_s", "node", "socket", "core", "freq_c0_mhz",
             "pkg_freq_c0_mhz", "one_minus_c0_pkg", "pkg_power_w"},
            {{"0", "n0", "0", "0", "1", "1", "0", "30"}});
  CHECK_THROWS_WITH_AS(
      static_cast<void>(ingest_csv(dir.file("missing.csv"))),
      doctest::Contains("core_temp_c"), DataError);

  write_csv(dir.file("dup.csv"),
            {"ts_epoch_s", "node", "socket", "core", "freq_c0_mhz",
             "pkg_freq_c0_mhz", "one_minus_c0_pkg", "pkg_power_w",
             "core_temp_c"},
            {{"0", "n0", "0", "0", "1", "1", "0", "30", "50"},
             {"0", "n0", "0", "0", "1", "1", "0", "30", "50"}});
  CHECK_THROWS_WITH_AS(static_cast<void>(ingest_csv(dir.file("dup.csv"))),
                       doctest::Contains("line 3"), DataError);

  write_csv(dir.file("nonmono.csv"),
            {"ts_epoch_s", "node", "socket", "core", "freq_c0_mhz",
             "pkg_freq_c0_mhz", "one_minus_c0_pkg", "pkg_power_w",
             "core_temp_c"},
            {{"4", "n0", "0", "0", "1", "1", "0", "30", "50"},
             {"2", "n0", "0", "0", "1", "1", "0", "30", "50"}});
  CHECK_THROWS_WITH_AS(static_cast<void>(ingest_csv(dir.file("nonmono.csv"))),
                       doctest::Contains("non-monotone"), DataError);

  write_csv(dir.file("nan.csv"),
            {"ts_epoch_s", "node", "socket", "core", "freq_c0_mhz",
             "pkg_freq_c0_mhz", "one_minus_c0_pkg", "pkg_power_w",
             "core_temp_c"},
            {{"0", "n0", "0", "0", "abc", "1", "0", "30", "50"}});
  CHECK_THROWS_WITH_AS(static_cast<void>(ingest_csv(dir.file("nan.csv"))),
                       doctest::Contains("non-numeric"), DataError);
}

TEST_CASE("identification study produces labeled cells and artifacts") {
  TempDir dir;
  const SynthStudySpec spec = small_spec(13);
  const SynthStudyData data = gen_synth_study(spec);
  const PipelineConfig cfg = small_config(spec);
  const auto pms = fit_power_models(data.frames, cfg);

  StudyOptions opts;
  opts.collect_traces = true;
  const IdentStudyResult study =
      run_identification_study(data.frames, pms, cfg, opts);
  CHECK(study.cells.size() == 2 * 2 * 4);
  for (const auto& cell : study.cells) {
    CHECK(cell.trace_f.size() == (2 + 3) * 5);
    CHECK(cell.ident_f.size() == 2 * 2 + 2 + 4 + 2);
    CHECK(cell.trace_row.size() == (2 + 3) * cfg.cnn_input_len);
    if (cell.ok) CHECK(std::isfinite(cell.mean_err));
  }

  write_arx_models(study, dir.file("arx_models.json"));
  write_scores_csv(study, dir.file("scores.csv"));
  write_labels_csv(study, dir.file("labels.csv"));
  write_trace_features_csv(study, dir.file("features_trace.csv"));
  write_ident_features_csv(study, dir.file("features_ident.csv"));
  write_fig4_csv(study, dir.file("fig4_window_errors.csv"));
  write_fig7_csv(study, dir.file("fig7_scatter.csv"));

  // Stage-style reload: models + scores reproduce the labels.
  IdentStudyResult reloaded = load_arx_models(dir.file("arx_models.json"));
  apply_scores_csv(reloaded, dir.file("scores.csv"));
  label_cells(reloaded, cfg.thresholds);
  REQUIRE(reloaded.cells.size() == study.cells.size());
  for (std::size_t i = 0; i < study.cells.size(); ++i) {
    CHECK(reloaded.cells[i].label.label == study.cells[i].label.label);
    CHECK(reloaded.cells[i].ok == study.cells[i].ok);
  }

  // The corpus loader joins the three files by cell key.
  const IdentStudyResult corpus = load_corpus_from_files(
      dir.file("labels.csv"), dir.file("features_trace.csv"),
      dir.file("features_ident.csv"));
  REQUIRE(corpus.cells.size() == study.cells.size());
  CHECK(corpus.n_cores == 2);
  CHECK(corpus.n == 2);
  for (std::size_t i = 0; i < 4; ++i) {
    // CSV features parse back within print precision.
    CHECK((corpus.cells[i].ident_f - study.cells[i].ident_f)
              .cwiseAbs()
              .maxCoeff() <= 1e-12);
  }
}

TEST_CASE("score stage matches the study scores after a reload") {
  const SynthStudySpec spec = small_spec(17);
  const SynthStudyData data = gen_synth_study(spec);
  const PipelineConfig cfg = small_config(spec);
  const auto pms = fit_power_models(data.frames, cfg);
  const IdentStudyResult direct =
      run_identification_study(data.frames, pms, cfg);

  StudyOptions no_score;
  no_score.score = false;
  no_score.label = false;
  IdentStudyResult staged =
      run_identification_study(data.frames, pms, cfg, no_score);
  score_cells(staged, data.frames, pms, cfg);
  REQUIRE(staged.cells.size() == direct.cells.size());
  for (std::size_t i = 0; i < staged.cells.size(); ++i)
    if (direct.cells[i].ok)
      CHECK(staged.cells[i].mean_err ==
            doctest::Approx(direct.cells[i].mean_err).epsilon(1e-12));
}

TEST_CASE("study reruns are byte-identical under a fixed seed") {
  TempDir dir_a, dir_b;
  for (int round = 0; round < 2; ++round) {
    const TempDir& dir = round == 0 ? dir_a : dir_b;
    const SynthStudySpec spec = small_spec(23);
    const SynthStudyData data = gen_synth_study(spec);
    const PipelineConfig cfg = small_config(spec);
    const auto pms = fit_power_models(data.frames, cfg);
    const IdentStudyResult study =
        run_identification_study(data.frames, pms, cfg);
    export_telemetry_csv(data.frames, dir.file("tele.csv"));
    write_scores_csv(study, dir.file("scores.csv"));
    write_labels_csv(study, dir.file("labels.csv"));
    write_ident_features_csv(study, dir.file("features_ident.csv"));
    write_fig7_csv(study, dir.file("fig7_scatter.csv"));
  }
  for (const char* name : {"tele.csv", "scores.csv", "labels.csv",
                           "features_ident.csv", "fig7_scatter.csv"})
    CHECK(slurp(dir_a.file(name)) == slurp(dir_b.file(name)));
}

TEST_CASE("worker count does not change study results") {
  const SynthStudySpec spec = small_spec(29);
  const SynthStudyData data = gen_synth_study(spec);
  PipelineConfig cfg = small_config(spec);
  const auto pms = fit_power_models(data.frames, cfg);
  cfg.workers = 1;
  const IdentStudyResult serial =
      run_identification_study(data.frames, pms, cfg);
  cfg.workers = 4;
  const IdentStudyResult parallel =
      run_identification_study(data.frames, pms, cfg);
  REQUIRE(serial.cells.size() == parallel.cells.size());
  for (std::size_t i = 0; i < serial.cells.size(); ++i) {
    CHECK(serial.cells[i].mean_err == parallel.cells[i].mean_err);
    CHECK(serial.cells[i].label.label == parallel.cells[i].label.label);
  }
}

TEST_CASE("crash isolation: a failing cell never aborts the study") {
  const SynthStudySpec spec = small_spec(31);
  SynthStudyData data = gen_synth_study(spec);
  // Freeze one core's metric over the thermal span (training prefix stays
  // varied so the power fit is fine): that input's couplings become
  // unidentifiable and every cell on the socket records a failure.
  data.frames[0].core_freq_c0.row(1).tail(
      data.frames[0].n_samples() - spec.power_train_samples).setConstant(
      data.frames[0].core_freq_c0(1, spec.power_train_samples));
  const PipelineConfig cfg = small_config(spec);
  const auto pms = fit_power_models(data.frames, cfg);
  const IdentStudyResult study =
      run_identification_study(data.frames, pms, cfg);
  CHECK(study.cells.size() == 2 * 2 * 4);
  for (const auto& cell : study.cells)
    if (!cell.ok) {
      CHECK_FALSE(cell.error.empty());
      CHECK(cell.label.label == LabelClass::bad);
    }
}

TEST_CASE("power model set files align to frames by node and socket") {
  TempDir dir;
  const SynthStudySpec spec = small_spec(37);
  const SynthStudyData data = gen_synth_study(spec);
  const PipelineConfig cfg = small_config(spec);
  const auto pms = fit_power_models(data.frames, cfg);
  write_power_models(data.frames, pms, dir.file("power.json"));

  // Reverse the frame order; the loader must match by key.
  std::vector<TelemetryFrame> reversed = {data.frames[1], data.frames[0]};
  const auto loaded = load_power_models(dir.file("power.json"), reversed);
  CHECK(loaded[0].intercept == pms[1].intercept);
  CHECK(loaded[1].intercept == pms[0].intercept);
}

TEST_CASE("classifier split removes exclusion-band rows from training only") {
  IdentStudyResult study;
  study.n = 2;
  study.n_cores = 1;
  for (int i = 0; i < 100; ++i) {
    CellResult cell;
    cell.key = {"n0", 0, 0, i};
    cell.ok = true;
    cell.label.label = i % 10 == 0 ? LabelClass::excluded
                                   : (i % 2 == 0 ? LabelClass::good
                                                 : LabelClass::bad);
    study.cells.push_back(std::move(cell));
  }
  const SplitIndices split = split_corpus(study, 0.8, 42);
  CHECK(split.test.size() == 20);
  for (const auto idx : split.train)
    CHECK(study.cells[std::size_t(idx)].label.label != LabelClass::excluded);
  // Deterministic for a fixed seed.
  const SplitIndices again = split_corpus(study, 0.8, 42);
  CHECK(split.train == again.train);
  CHECK(split.test == again.test);
  const SplitIndices other = split_corpus(study, 0.8, 43);
  CHECK(split.test != other.test);
}

TEST_CASE("undersized corpus is refused with guidance") {
  IdentStudyResult study;
  study.n = 2;
  study.n_cores = 1;
  for (int i = 0; i < 50; ++i) {
    CellResult cell;
    cell.key = {"n0", 0, 0, i};
    study.cells.push_back(std::move(cell));
  }
  PipelineConfig cfg;
  cfg.min_corpus = 200;
  CHECK_THROWS_WITH_AS(static_cast<void>(run_classifier_study(study, cfg)),
                       doctest::Contains("200"), ConfigError);
}

}  // TEST_SUITE

TEST_SUITE("pipeline_oracles") {

namespace {

coretherm::IdentStudyResult single_kind_study(coretherm::WorkloadKind kind,
                                              std::uint64_t seed) {
  using namespace coretherm;
  SynthStudySpec spec;
  spec.n_sockets = 3;
  spec.n_cores = 4;
  spec.window_count = 6;
  spec.seed = seed;
  spec.straddle_prob = 0.0;
  spec.node_kind_prob = 1.0;
  spec.mix = {0.0, 0.0, 0.0, 0.0};
  switch (kind) {
    case WorkloadKind::prbs: spec.mix.prbs = 1.0; break;
    case WorkloadKind::constant: spec.mix.constant = 1.0; break;
    case WorkloadKind::sinusoid: spec.mix.sinusoid = 1.0; break;
    case WorkloadKind::job_steps: spec.mix.job_steps = 1.0; break;
  }
  SynthStudyData data = gen_synth_study(spec);
  PipelineConfig cfg;
  cfg.power_train_samples = spec.power_train_samples;
  cfg.window_len = spec.window_len;
  cfg.window_count = spec.window_count;
  return run_identification_study(data.frames,
                                  fit_power_models(data.frames, cfg), cfg);
}

}  // namespace

TEST_CASE("all-prbs corpus labels good, all-constant labels unusable") {
  // Generator separation oracle: well-excited windows must come out good,
  // constant-load windows must never come out good (most strictly bad or
  // excitation-deficient, the rest caught by the exclusion band).
  const IdentStudyResult prbs =
      single_kind_study(WorkloadKind::prbs, 2101);
  long good = 0;
  for (const auto& c : prbs.cells) good += c.label.label == LabelClass::good;
  CHECK(double(good) / double(prbs.cells.size()) >= 0.95);

  const IdentStudyResult flat =
      single_kind_study(WorkloadKind::constant, 2102);
  long not_good = 0, bad_or_failed = 0;
  for (const auto& c : flat.cells) {
    not_good += c.label.label != LabelClass::good;
    bad_or_failed += (c.label.label == LabelClass::bad) || !c.ok;
  }
  CHECK(double(not_good) / double(flat.cells.size()) >= 0.95);
  CHECK(double(bad_or_failed) / double(flat.cells.size()) >= 0.90);
}

}  // TEST_SUITE
