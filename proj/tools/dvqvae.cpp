// Command-line entry points: datagen, train (two-phase), sample, evaluate,
// export. Every command is reproducible from (config, seed); reruns produce
// identical artifacts.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dvq/datagen.hpp"
#include "dvq/errors.hpp"
#include "dvq/metrics.hpp"
#include "dvq/model.hpp"
#include "dvq/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dvq;

namespace {

// Relative data paths resolve against DVQVAE_DATA_ROOT when it is set.
std::string resolve_path(const std::string& path) {
    if (path.empty() || fs::path(path).is_absolute()) return path;
    const char* root = std::getenv("DVQVAE_DATA_ROOT");
    if (root == nullptr || *root == '\0') return path;
    return (fs::path(root) / path).string();
}

// All hyperparameters in one schema-validated record. Defaults follow the
// published settings: lr 1e-4 for 200 epochs halved at {60,120,160,180},
// prior phase lr 3e-4 for 100 epochs.
struct RunConfig {
    model::ModelConfig model;
    train::TrainConfig train;
    int prior_epochs = 100;
    double prior_lr = 3e-4;
};

RunConfig default_run_config() {
    RunConfig cfg;
    cfg.train.epochs = 200;
    cfg.train.base_lr = 1e-4;
    cfg.train.lr_halve_epochs = {60, 120, 160, 180};
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("config file not found: " + path);
    json j = json::parse(in);
    static const std::set<std::string> known = {
        "latent_dim",      "codebook_size", "part_count",      "encoder_hidden",
        "decoder_hidden",  "reverse_stages", "epochs",          "base_lr",
        "lr_halve_epochs", "batch_size",    "seed",            "prior_epochs",
        "prior_lr"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!known.count(key)) throw InvalidParameterError("config: unknown key '" + key + "'");
    }
    RunConfig cfg = default_run_config();
    cfg.model.latent_dim = j.value("latent_dim", cfg.model.latent_dim);
    cfg.model.codebook_size = j.value("codebook_size", cfg.model.codebook_size);
    cfg.model.part_count = j.value("part_count", cfg.model.part_count);
    cfg.model.encoder_hidden = j.value("encoder_hidden", cfg.model.encoder_hidden);
    cfg.model.decoder_hidden = j.value("decoder_hidden", cfg.model.decoder_hidden);
    cfg.model.reverse_stages = j.value("reverse_stages", cfg.model.reverse_stages);
    cfg.train.epochs = j.value("epochs", cfg.train.epochs);
    cfg.train.base_lr = j.value("base_lr", cfg.train.base_lr);
    if (j.contains("lr_halve_epochs"))
        cfg.train.lr_halve_epochs = j["lr_halve_epochs"].get<std::vector<int>>();
    cfg.train.batch_size = j.value("batch_size", cfg.train.batch_size);
    cfg.train.seed = j.value("seed", cfg.train.seed);
    cfg.model.seed = cfg.train.seed;
    cfg.prior_epochs = j.value("prior_epochs", cfg.prior_epochs);
    cfg.prior_lr = j.value("prior_lr", cfg.prior_lr);
    return cfg;
}

std::string prior_path_for(const std::string& checkpoint) { return checkpoint + ".prior"; }

int cmd_datagen(const std::string& out, int objects, int grasps, unsigned seed, int cloud_points,
                int iterations, const std::string& objects_dir) {
    const hand::HandTemplate tmpl = hand::procedural_template();
    data::GraspGenConfig gcfg;
    gcfg.iterations = iterations;
    const auto samples = data::make_corpus(objects, grasps, tmpl, seed, cloud_points, gcfg);
    data::save_dataset(samples, resolve_path(out));
    std::printf("wrote %zu samples to %s\n", samples.size(), out.c_str());
    if (!objects_dir.empty()) {
        fs::create_directories(objects_dir);
        for (int o = 0; o < objects; ++o) {
            char name[32];
            std::snprintf(name, sizeof(name), "object_%03d.obj", o);
            geom::save_obj(samples[static_cast<size_t>(o) * grasps].object_mesh,
                           (fs::path(objects_dir) / name).string());
        }
        std::printf("wrote %d object meshes to %s\n", objects, objects_dir.c_str());
    }
    return 0;
}

int cmd_train(const std::string& data_path, const std::string& out, const RunConfig& run,
              bool resume, const std::string& loss_csv, bool verbose) {
    const auto corpus = data::load_dataset(resolve_path(data_path));
    const hand::HandTemplate tmpl = hand::procedural_template();

    std::unique_ptr<model::DvqVae> model;
    train::TrainConfig tcfg = run.train;
    nn::Adam adam(tcfg.base_lr);
    const std::string ckpt = resolve_path(out);
    if (resume) {
        model = model::DvqVae::from_checkpoint(ckpt, true);
        tcfg.start_epoch = model->epochs_done();
        adam.set_steps(model->opt_steps());
        std::printf("resuming from epoch %d\n", tcfg.start_epoch);
    } else {
        model = std::make_unique<model::DvqVae>(run.model, tmpl);
    }
    tcfg.verbose = verbose;
    tcfg.loss_csv = loss_csv;

    std::vector<train::EpochStats> stats;
    try {
        stats = train::train_model(*model, adam, corpus, tcfg);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "training aborted: %s\n", e.what());
        return 1;
    }
    model->save_checkpoint(ckpt, true);
    if (!stats.empty())
        std::printf("phase 1 done: %zu epochs, final total=%.4f l_v=%.4f\n", stats.size(),
                    stats.back().total, stats.back().l_v);

    prior::FitResult fit = train::fit_prior_phase(*model, corpus, run.prior_epochs,
                                                  tcfg.seed, run.prior_lr);
    fit.model.save(prior_path_for(ckpt));
    model->save_checkpoint(ckpt, true);  // persists token usage from extraction
    std::printf("phase 2 done: prior NLL %.4f -> %.4f over %d epochs\n",
                fit.nll_per_epoch.front(), fit.nll_per_epoch.back(), run.prior_epochs);
    return 0;
}

json params_to_json(const hand::HandParams& p) {
    const Eigen::VectorXd v = p.to_vector();
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

int cmd_sample(const std::string& checkpoint, const std::string& object_path, int num,
               unsigned seed, double temperature, double mask_ratio, int cloud_points,
               const std::string& out_dir) {
    const std::string ckpt = resolve_path(checkpoint);
    auto model = model::DvqVae::from_checkpoint(ckpt, false);
    const prior::IndexPrior prior = prior::IndexPrior::load(prior_path_for(ckpt));

    const geom::TriMesh object = geom::load_obj(resolve_path(object_path));
    std::mt19937_64 cloud_rng(seed);
    Eigen::MatrixXd cloud = geom::sample_surface(object, cloud_points, cloud_rng);
    if (mask_ratio > 0.0) cloud = model::mask_cloud(cloud, mask_ratio, seed ^ 0x5EEDu);

    fs::create_directories(out_dir);
    const std::string stem = fs::path(object_path).stem().string();
    json manifest;
    manifest["object"] = stem;
    manifest["seed"] = seed;
    manifest["temperature"] = temperature;
    manifest["mask_ratio"] = mask_ratio;
    manifest["grasps"] = json::array();
    for (int i = 0; i < num; ++i) {
        const model::GraspOutput g = model->generate_grasp(cloud, prior, seed + 1000u * i,
                                                           temperature);
        char name[64];
        std::snprintf(name, sizeof(name), "%s__%03d.obj", stem.c_str(), i);
        geom::save_obj({g.mesh.vertices, g.mesh.faces}, (fs::path(out_dir) / name).string());
        json rec;
        rec["file"] = name;
        rec["object_index"] = g.indices.l_o;
        rec["hand_indices"] = g.indices.l_h;
        rec["params"] = params_to_json(g.params);
        manifest["grasps"].push_back(rec);
    }
    std::ofstream mf(fs::path(out_dir) / "manifest.json");
    mf << manifest.dump(2) << "\n";
    std::printf("wrote %d grasps + manifest to %s\n", num, out_dir.c_str());
    return 0;
}

// Grasp files are named <object-stem>__<k>.obj and match <object-stem>.obj in
// the object directory.
int cmd_evaluate(const std::string& grasp_dir, const std::string& object_dir,
                 const std::string& out_csv, const std::string& curve_csv, double tau,
                 int cloud_points) {
    struct Entry {
        std::string file;
        std::string object_stem;
    };
    std::vector<Entry> entries;
    std::vector<std::string> unmatched;
    for (const auto& it : fs::directory_iterator(grasp_dir)) {
        if (it.path().extension() != ".obj") continue;
        const std::string stem = it.path().stem().string();
        const auto sep = stem.rfind("__");
        if (sep == std::string::npos) {
            unmatched.push_back(it.path().filename().string());
            continue;
        }
        const std::string obj_stem = stem.substr(0, sep);
        if (!fs::exists(fs::path(object_dir) / (obj_stem + ".obj"))) {
            unmatched.push_back(it.path().filename().string());
            continue;
        }
        entries.push_back({it.path().filename().string(), obj_stem});
    }
    if (!unmatched.empty()) {
        std::string msg = "evaluate: unmatched grasp files:";
        for (const auto& f : unmatched) msg += " " + f;
        throw InvalidInputError(msg);
    }
    if (entries.empty()) throw InvalidInputError("evaluate: no grasp files in " + grasp_dir);
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.file < b.file; });

    std::map<std::string, geom::TriMesh> objects;
    std::map<std::string, Eigen::MatrixXd> clouds;
    for (const auto& e : entries) {
        if (objects.count(e.object_stem)) continue;
        objects[e.object_stem] =
            geom::load_obj((fs::path(object_dir) / (e.object_stem + ".obj")).string());
        std::mt19937_64 rng(0);
        clouds[e.object_stem] = geom::sample_surface(objects[e.object_stem], cloud_points, rng);
    }

    // Optional manifest supplies hand parameters for the diversity metric.
    std::vector<hand::HandParams> params;
    const fs::path manifest_path = fs::path(grasp_dir) / "manifest.json";
    if (fs::exists(manifest_path)) {
        std::ifstream in(manifest_path);
        json manifest = json::parse(in);
        std::map<std::string, hand::HandParams> by_file;
        for (const auto& rec : manifest["grasps"]) {
            const auto vals = rec["params"].get<std::vector<double>>();
            Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(
                vals.data(), static_cast<Eigen::Index>(vals.size()));
            by_file[rec["file"].get<std::string>()] = hand::HandParams::from_vector(v);
        }
        for (const auto& e : entries) {
            auto it = by_file.find(e.file);
            if (it != by_file.end()) params.push_back(it->second);
        }
    }

    const auto t0 = std::chrono::steady_clock::now();
    std::vector<metrics::GraspCase> cases;
    std::vector<geom::TriMesh> hands(entries.size());
    std::vector<double> pens, disps;
    std::ofstream csv(out_csv);
    csv << "file,object,penetration_cm3,displacement_cm,quality_index\n";
    for (size_t i = 0; i < entries.size(); ++i) {
        const Entry& e = entries[i];
        hands[i] = geom::load_obj((fs::path(grasp_dir) / e.file).string());
        const geom::TriMesh& obj = objects.at(e.object_stem);
        const double pen = metrics::penetration_volume_cm3(hands[i], obj);
        const double disp = metrics::simulation_displacement(hands[i], obj);
        pens.push_back(pen);
        disps.push_back(disp);
        cases.push_back({hands[i].vertices, &obj, &clouds.at(e.object_stem)});
        char row[256];
        std::snprintf(row, sizeof(row), "%s,%s,%.6f,%.6f,%.6f\n", e.file.c_str(),
                      e.object_stem.c_str(), pen, disp, metrics::quality_index(pen, disp));
        csv << row;
    }

    metrics::MetricsReport agg;
    agg.contact_ratio = metrics::contact_ratio(cases, tau);
    agg.penetration_volume =
        std::accumulate(pens.begin(), pens.end(), 0.0) / static_cast<double>(pens.size());
    agg.grasp_disp =
        std::accumulate(disps.begin(), disps.end(), 0.0) / static_cast<double>(disps.size());
    agg.quality_index = metrics::quality_index(agg.penetration_volume, agg.grasp_disp);
    if (params.size() == entries.size() && params.size() >= 2) {
        const hand::HandTemplate tmpl = hand::procedural_template();
        const int k = std::min<int>(20, static_cast<int>(params.size()));
        const metrics::DiversityResult d = metrics::diversity(params, tmpl, k);
        agg.entropy = d.entropy;
        agg.cluster_size = d.cluster_size;
    }
    agg.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char row[320];
    std::snprintf(row, sizeof(row),
                  "aggregate,,%.6f,%.6f,%.6f\n"
                  "# contact_ratio=%.2f entropy=%.4f cluster_size=%.6f runtime_s=%.3f\n",
                  agg.penetration_volume, agg.grasp_disp, agg.quality_index, agg.contact_ratio,
                  agg.entropy, agg.cluster_size, agg.runtime_s);
    csv << row;

    if (!curve_csv.empty()) {
        std::vector<double> thresholds;
        for (double t = 0.5; t <= 6.0 + 1e-9; t += 0.5) thresholds.push_back(t);
        const auto curve = metrics::high_quality_ratio(pens, disps, thresholds, 2.0);
        std::ofstream cc(curve_csv);
        cc << "penetration_threshold_cm3,high_quality_ratio\n";
        for (const auto& [t, r] : curve) {
            char line[64];
            std::snprintf(line, sizeof(line), "%.2f,%.6f\n", t, r);
            cc << line;
        }
    }
    std::printf("evaluated %zu grasps: contact %.1f%% pen %.3f cm^3 disp %.3f cm Q %.3f\n",
                entries.size(), agg.contact_ratio, agg.penetration_volume, agg.grasp_disp,
                agg.quality_index);
    return 0;
}

// Dumps codebook usage histograms and, when a dataset is given, ground-truth
// grasp/object meshes in the layout `evaluate` consumes.
int cmd_export(const std::string& checkpoint, const std::string& usage_csv,
               const std::string& data_path, const std::string& grasps_dir,
               const std::string& objects_dir, int limit) {
    if (!usage_csv.empty()) {
        auto model = model::DvqVae::from_checkpoint(resolve_path(checkpoint), false);
        model->write_usage_csv(usage_csv);
        std::printf("wrote usage histogram to %s\n", usage_csv.c_str());
    }
    if (!data_path.empty()) {
        if (grasps_dir.empty() || objects_dir.empty())
            throw InvalidParameterError("export: --data requires --grasps-dir and --objects-dir");
        const auto samples = data::load_dataset(resolve_path(data_path));
        fs::create_directories(grasps_dir);
        fs::create_directories(objects_dir);
        const hand::HandTemplate tmpl = hand::procedural_template();
        const size_t n = limit > 0 ? std::min<size_t>(samples.size(), limit) : samples.size();
        json manifest;
        manifest["grasps"] = json::array();
        std::set<std::string> written_objects;
        for (size_t i = 0; i < n; ++i) {
            char obj_name[32], grasp_name[48];
            std::snprintf(obj_name, sizeof(obj_name), "sample_%04zu", i);
            // Group grasps of identical objects by matching clouds upstream
            // is unnecessary: each sample carries its own object copy.
            std::snprintf(grasp_name, sizeof(grasp_name), "%s__000.obj", obj_name);
            if (!written_objects.count(obj_name)) {
                geom::save_obj(samples[i].object_mesh,
                               (fs::path(objects_dir) / (std::string(obj_name) + ".obj")).string());
                written_objects.insert(obj_name);
            }
            geom::save_obj({samples[i].gt_vertices, tmpl.faces},
                           (fs::path(grasps_dir) / grasp_name).string());
            json rec;
            rec["file"] = grasp_name;
            rec["params"] = params_to_json(samples[i].gt_params);
            manifest["grasps"].push_back(rec);
        }
        std::ofstream mf(fs::path(grasps_dir) / "manifest.json");
        mf << manifest.dump(2) << "\n";
        std::printf("exported %zu ground-truth grasps to %s\n", n, grasps_dir.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decomposed VQ-VAE grasp generation pipeline"};
    app.require_subcommand(1);

    // datagen
    auto* dg = app.add_subcommand("datagen", "Generate the synthetic grasp corpus");
    std::string dg_out = "dataset.dvqd", dg_objects_dir;
    int dg_objects = 64, dg_grasps = 8, dg_cloud = 3000, dg_iters = 100;
    unsigned dg_seed = 7;
    dg->add_option("--out", dg_out, "Dataset archive path");
    dg->add_option("--objects", dg_objects, "Number of objects");
    dg->add_option("--grasps", dg_grasps, "Grasps per object");
    dg->add_option("--seed", dg_seed, "RNG seed");
    dg->add_option("--cloud-points", dg_cloud, "Surface samples per object");
    dg->add_option("--iterations", dg_iters, "Optimization steps per grasp");
    dg->add_option("--objects-dir", dg_objects_dir, "Also write object meshes here");

    // train
    auto* tr = app.add_subcommand("train", "Two-phase training (Eq. 18, then the prior)");
    std::string tr_data, tr_out = "model.ckpt", tr_config, tr_loss_csv;
    bool tr_resume = false, tr_verbose = false;
    tr->add_option("--data", tr_data, "Dataset archive")->required();
    tr->add_option("--out", tr_out, "Checkpoint path (prior saved alongside)");
    tr->add_option("--config", tr_config, "JSON run configuration");
    tr->add_option("--loss-csv", tr_loss_csv, "Per-epoch loss CSV");
    tr->add_flag("--resume", tr_resume, "Continue from the checkpoint at --out");
    tr->add_flag("--verbose", tr_verbose, "Per-epoch progress on stderr");

    // sample
    auto* sm = app.add_subcommand("sample", "Generate grasps for an object mesh");
    std::string sm_ckpt = "model.ckpt", sm_object, sm_out = "samples";
    int sm_num = 4, sm_cloud = 3000;
    unsigned sm_seed = 0;
    double sm_temp = 1.0, sm_mask = 0.0;
    sm->add_option("--checkpoint", sm_ckpt, "Trained checkpoint");
    sm->add_option("--object", sm_object, "Object mesh (.obj)")->required();
    sm->add_option("--num", sm_num, "Number of grasps");
    sm->add_option("--seed", sm_seed, "RNG seed");
    sm->add_option("--temperature", sm_temp, "Prior sampling temperature");
    sm->add_option("--mask-ratio", sm_mask, "Fraction of cloud points to drop");
    sm->add_option("--cloud-points", sm_cloud, "Surface samples for encoding");
    sm->add_option("--out", sm_out, "Output directory");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Metric report over grasp/object directories");
    std::string ev_grasps, ev_objects, ev_out = "report.csv", ev_curve;
    double ev_tau = 0.005;
    int ev_cloud = 2000;
    ev->add_option("--grasps", ev_grasps, "Directory of grasp meshes")->required();
    ev->add_option("--objects", ev_objects, "Directory of object meshes")->required();
    ev->add_option("--out", ev_out, "Report CSV path");
    ev->add_option("--curve", ev_curve, "High-quality-ratio curve CSV");
    ev->add_option("--tau", ev_tau, "Contact threshold (m)");
    ev->add_option("--cloud-points", ev_cloud, "Surface samples per object");

    // export
    auto* ex = app.add_subcommand("export", "Dump usage histograms / ground-truth meshes");
    std::string ex_ckpt, ex_usage, ex_data, ex_grasps, ex_objects;
    int ex_limit = 0;
    ex->add_option("--checkpoint", ex_ckpt, "Checkpoint for usage export");
    ex->add_option("--usage-csv", ex_usage, "Codebook usage CSV path");
    ex->add_option("--data", ex_data, "Dataset archive to export meshes from");
    ex->add_option("--grasps-dir", ex_grasps, "Ground-truth grasp mesh directory");
    ex->add_option("--objects-dir", ex_objects, "Object mesh directory");
    ex->add_option("--limit", ex_limit, "Export at most this many samples (0 = all)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (dg->parsed())
            return cmd_datagen(dg_out, dg_objects, dg_grasps, dg_seed, dg_cloud, dg_iters,
                               dg_objects_dir);
        if (tr->parsed()) {
            RunConfig run = tr_config.empty() ? default_run_config() : load_run_config(tr_config);
            return cmd_train(tr_data, tr_out, run, tr_resume, tr_loss_csv, tr_verbose);
        }
        if (sm->parsed())
            return cmd_sample(sm_ckpt, sm_object, sm_num, sm_seed, sm_temp, sm_mask, sm_cloud,
                              sm_out);
        if (ev->parsed())
            return cmd_evaluate(ev_grasps, ev_objects, ev_out, ev_curve, ev_tau, ev_cloud);
        if (ex->parsed())
            return cmd_export(ex_ckpt, ex_usage, ex_data, ex_grasps, ex_objects, ex_limit);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
