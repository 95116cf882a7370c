// End-to-end pipeline: training smoke, resume determinism, checkpoint round
// trips, inference determinism, ablation config paths, and the CLI surface.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dvq/datagen.hpp"
#include "dvq/errors.hpp"
#include "dvq/model.hpp"
#include "dvq/train.hpp"

using namespace dvq;
using Eigen::MatrixXd;
namespace fs = std::filesystem;

namespace {

// Tiny corpus and model so each training run stays in the low seconds.
const std::vector<data::SyntheticSample>& tiny_corpus() {
    static const std::vector<data::SyntheticSample> corpus = [] {
        data::GraspGenConfig cfg;
        cfg.iterations = 40;
        cfg.loss_cloud_points = 400;
        return data::make_corpus(4, 2, hand::procedural_template(), 3, 600, cfg);
    }();
    return corpus;
}

model::ModelConfig tiny_config() {
    model::ModelConfig cfg;
    cfg.latent_dim = 16;
    cfg.codebook_size = 8;
    cfg.encoder_hidden = 32;
    cfg.decoder_hidden = 32;
    return cfg;
}

train::TrainConfig tiny_train(int epochs) {
    train::TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.base_lr = 3e-4;
    cfg.lr_halve_epochs = {};
    cfg.batch_size = 4;
    cfg.seed = 11;
    return cfg;
}

std::string tmp_path(const std::string& name) {
    return (fs::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(DVQ_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

}  // namespace

// [DERIVED: training smoke oracle] A short run must already move the
// reconstruction loss downward; the 50% criterion lives in the full-scale
// acceptance gate.
TEST_CASE("short training run decreases the loss") {
    const auto& corpus = tiny_corpus();
    model::DvqVae vae(tiny_config(), hand::procedural_template());
    train::TrainConfig cfg = tiny_train(6);
    nn::Adam adam(cfg.base_lr);
    const auto stats = train::train_model(vae, adam, corpus, cfg);
    REQUIRE(stats.size() == 6);
    CHECK(std::isfinite(stats.back().total));
    CHECK(stats.back().total < stats.front().total);
    CHECK(stats.back().l_v < stats.front().l_v);
    CHECK(vae.trained());
    CHECK(vae.epochs_done() == 6);
}

// [DERIVED: resume determinism] Stopping after two epochs, checkpointing with
// optimizer state, and resuming reproduces the uninterrupted run's subsequent
// epoch losses within 1e-5.
TEST_CASE("resumed training reproduces the uninterrupted run") {
    const auto& corpus = tiny_corpus();
    const hand::HandTemplate tmpl = hand::procedural_template();

    model::DvqVae full(tiny_config(), tmpl);
    train::TrainConfig cfg4 = tiny_train(4);
    nn::Adam adam_full(cfg4.base_lr);
    const auto stats_full = train::train_model(full, adam_full, corpus, cfg4);

    model::DvqVae part(tiny_config(), tmpl);
    train::TrainConfig cfg2 = tiny_train(2);
    nn::Adam adam_part(cfg2.base_lr);
    const auto stats_part = train::train_model(part, adam_part, corpus, cfg2);
    const std::string ckpt = tmp_path("dvq_resume.ckpt");
    part.save_checkpoint(ckpt, true);

    auto resumed = model::DvqVae::from_checkpoint(ckpt, true);
    nn::Adam adam_res(cfg4.base_lr);
    adam_res.set_steps(resumed->opt_steps());
    train::TrainConfig cfg_res = tiny_train(4);
    cfg_res.start_epoch = resumed->epochs_done();
    const auto stats_res = train::train_model(*resumed, adam_res, corpus, cfg_res);

    REQUIRE(stats_part.size() == 2);
    REQUIRE(stats_res.size() == 2);
    for (size_t i = 0; i < 2; ++i) {
        CHECK(stats_res[i].epoch == stats_full[i + 2].epoch);
        CHECK(stats_res[i].total == doctest::Approx(stats_full[i + 2].total).epsilon(1e-5));
        CHECK(stats_res[i].l_v == doctest::Approx(stats_full[i + 2].l_v).epsilon(1e-5));
    }
    fs::remove(ckpt);
}

// [DERIVED: checkpoint equivalence] A save/load round trip evaluates the
// training graph to the identical loss on every sample.
TEST_CASE("checkpoint round trip preserves the model") {
    const auto& corpus = tiny_corpus();
    model::DvqVae vae(tiny_config(), hand::procedural_template());
    train::TrainConfig cfg = tiny_train(2);
    nn::Adam adam(cfg.base_lr);
    train::train_model(vae, adam, corpus, cfg);

    const std::string ckpt = tmp_path("dvq_roundtrip.ckpt");
    vae.save_checkpoint(ckpt);
    auto loaded = model::DvqVae::from_checkpoint(ckpt);
    CHECK(loaded->trained());
    CHECK(loaded->config().latent_dim == 16);
    for (const auto& sample : corpus) {
        const auto a = vae.training_step(sample, false);
        const auto b = loaded->training_step(sample, false);
        CHECK(a.total == b.total);
        CHECK(a.l_v == b.l_v);
        const auto sa = vae.index_sequence(sample);
        const auto sb = loaded->index_sequence(sample);
        CHECK(sa.l_o == sb.l_o);
        CHECK(sa.l_h == sb.l_h);
    }
    fs::remove(ckpt);
}

// [DERIVED: inference determinism + diversity smoke] Same seed, same grasp;
// the corpus yields at least two distinct hand-token sequences overall.
TEST_CASE("generation is deterministic per seed") {
    const auto& corpus = tiny_corpus();
    model::DvqVae vae(tiny_config(), hand::procedural_template());
    train::TrainConfig cfg = tiny_train(3);
    nn::Adam adam(cfg.base_lr);
    train::train_model(vae, adam, corpus, cfg);
    const auto fit = train::fit_prior_phase(vae, corpus, 10, 5);

    const MatrixXd& cloud = corpus[0].object_cloud;
    const auto g1 = vae.generate_grasp(cloud, fit.model, 42);
    const auto g2 = vae.generate_grasp(cloud, fit.model, 42);
    CHECK(g1.mesh.vertices == g2.mesh.vertices);
    CHECK(g1.indices.l_h == g2.indices.l_h);
    CHECK(g1.mesh.vertices.rows() == 778);
    CHECK(g1.mesh.vertices.allFinite());

    std::set<std::vector<int>> distinct;
    for (unsigned s = 0; s < 8; ++s)
        distinct.insert(vae.generate_grasp(cloud, fit.model, s, 1.5).indices.l_h);
    CHECK(distinct.size() >= 2);
}

// [TRIVIAL: config paths] N=1 collapses the decomposition to a single hand
// codebook; reverse_stages decodes position before posture. Both must train.
TEST_CASE("ablation configurations run end to end") {
    const auto& corpus = tiny_corpus();
    const hand::HandTemplate tmpl = hand::procedural_template();

    SUBCASE("single-part (no decomposition)") {
        model::ModelConfig mc = tiny_config();
        mc.part_count = 1;
        model::DvqVae vae(mc, tmpl);
        CHECK(vae.vocab().size() == 2);
        train::TrainConfig cfg = tiny_train(2);
        nn::Adam adam(cfg.base_lr);
        const auto stats = train::train_model(vae, adam, corpus, cfg);
        CHECK(std::isfinite(stats.back().total));
        const auto fit = train::fit_prior_phase(vae, corpus, 5, 1);
        const auto g = vae.generate_grasp(corpus[0].object_cloud, fit.model, 0);
        CHECK(g.indices.l_h.size() == 1);
    }
    SUBCASE("reversed dual stage") {
        model::ModelConfig mc = tiny_config();
        mc.reverse_stages = true;
        model::DvqVae vae(mc, tmpl);
        train::TrainConfig cfg = tiny_train(2);
        nn::Adam adam(cfg.base_lr);
        const auto stats = train::train_model(vae, adam, corpus, cfg);
        CHECK(std::isfinite(stats.back().total));
    }
}

// [TRIVIAL: guard rails] Inference and the prior phase refuse untrained models.
TEST_CASE("not-ready paths throw") {
    const auto& corpus = tiny_corpus();
    model::DvqVae vae(tiny_config(), hand::procedural_template());
    CHECK_THROWS_AS(train::fit_prior_phase(vae, corpus, 2, 0), NotReadyError);
    prior::IndexPrior unfitted(vae.vocab(), 8, 16, 0);
    CHECK_THROWS_AS(vae.generate_grasp(corpus[0].object_cloud, unfitted, 0), NotReadyError);
}

// [DERIVED: masking keeps >= 1 point and a subset of the input]
TEST_CASE("mask_cloud keeps the right number of points") {
    const MatrixXd& cloud = tiny_corpus()[0].object_cloud;
    for (double ratio : {0.0, 0.5, 0.9}) {
        const MatrixXd masked = model::mask_cloud(cloud, ratio, 9);
        const auto expect = static_cast<Eigen::Index>(
            std::ceil((1.0 - ratio) * static_cast<double>(cloud.rows())));
        CHECK(masked.rows() == std::max<Eigen::Index>(1, expect));
        for (int i = 0; i < std::min<Eigen::Index>(masked.rows(), 20); ++i) {
            bool found = false;
            for (int j = 0; j < cloud.rows() && !found; ++j)
                found = (masked.row(i) == cloud.row(j));
            CHECK(found);
        }
    }
    CHECK_THROWS_AS(model::mask_cloud(cloud, 1.5, 0), InvalidParameterError);
}

// [TRIVIAL + DERIVED] CLI surface: datagen -> train -> sample -> evaluate,
// with a byte-identical manifest on rerun and GT export feeding evaluate.
TEST_CASE("cli pipeline round trip") {
    const fs::path root = fs::temp_directory_path() / "dvq_cli";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string data = (root / "data.dvqd").string();
    const std::string objects = (root / "objects").string();

    REQUIRE(run_cli("datagen --out " + data + " --objects 4 --grasps 2 --seed 3" +
                    " --cloud-points 600 --iterations 40 --objects-dir " + objects) == 0);
    CHECK(fs::exists(objects + "/object_003.obj"));

    const std::string cfg_path = (root / "run.json").string();
    {
        std::ofstream cfg(cfg_path);
        cfg << R"({"latent_dim":16,"codebook_size":8,"encoder_hidden":32,"decoder_hidden":32,)"
            << R"("epochs":3,"base_lr":3e-4,"lr_halve_epochs":[],"batch_size":4,"seed":11,)"
            << R"("prior_epochs":5})";
    }
    const std::string ckpt = (root / "model.ckpt").string();
    const std::string loss_csv = (root / "loss.csv").string();
    REQUIRE(run_cli("train --data " + data + " --out " + ckpt + " --config " + cfg_path +
                    " --loss-csv " + loss_csv) == 0);
    CHECK(fs::exists(ckpt));
    CHECK(fs::exists(ckpt + ".prior"));
    CHECK(slurp(loss_csv).rfind("epoch,total,l_r,l_e,l_m,l_c,l_p,l_v", 0) == 0);

    // Unknown config keys are rejected.
    const std::string bad_cfg = (root / "bad.json").string();
    {
        std::ofstream cfg(bad_cfg);
        cfg << R"({"epochs":1,"learning_rate":0.1})";
    }
    CHECK(run_cli("train --data " + data + " --out " + ckpt + " --config " + bad_cfg) != 0);

    // n=2, fixed seed: byte-identical manifest on rerun.
    const std::string object = objects + "/object_000.obj";
    const std::string s1 = (root / "s1").string(), s2 = (root / "s2").string();
    const std::string sample_args = " --checkpoint " + ckpt + " --object " + object +
                                    " --num 2 --seed 5 --cloud-points 600 --out ";
    REQUIRE(run_cli("sample" + sample_args + s1) == 0);
    REQUIRE(run_cli("sample" + sample_args + s2) == 0);
    const std::string m1 = slurp(s1 + "/manifest.json");
    CHECK(m1 == slurp(s2 + "/manifest.json"));
    CHECK(!m1.empty());
    CHECK(fs::exists(s1 + "/object_000__001.obj"));

    // Masked sampling still completes (Table 3 operational parity).
    REQUIRE(run_cli("sample" + sample_args + (root / "s3").string() + " --mask-ratio 0.9") == 0);

    // GT export feeds evaluate; synthetic grasps are near-contact by
    // construction, so the report must exist with the documented columns.
    const std::string gt = (root / "gt").string();
    REQUIRE(run_cli("export --data " + data + " --grasps-dir " + gt + " --objects-dir " + gt +
                    "_obj --limit 4") == 0);
    const std::string report = (root / "report.csv").string();
    const std::string curve = (root / "curve.csv").string();
    REQUIRE(run_cli("evaluate --grasps " + gt + " --objects " + gt + "_obj --out " + report +
                    " --curve " + curve + " --cloud-points 600") == 0);
    const std::string body = slurp(report);
    CHECK(body.rfind("file,object,penetration_cm3,displacement_cm,quality_index", 0) == 0);
    CHECK(body.find("aggregate") != std::string::npos);
    CHECK(slurp(curve).rfind("penetration_threshold_cm3,high_quality_ratio", 0) == 0);

    // Unmatched grasp files are reported as an error.
    std::ofstream((root / "gt" / "orphan__000.obj")) << "v 0 0 0\n";
    CHECK(run_cli("evaluate --grasps " + gt + " --objects " + gt + "_obj --out " + report) != 0);

    // Usage histogram export.
    const std::string usage = (root / "usage.csv").string();
    REQUIRE(run_cli("export --checkpoint " + ckpt + " --usage-csv " + usage) == 0);
    CHECK(slurp(usage).rfind("book,index,count", 0) == 0);

    fs::remove_all(root);
}
