// modiffe: command-line driver for the cold-start bundle recommendation
// pipeline. Every subcommand writes into the directory given by --out and
// records what it wrote in <out>/manifest.json.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "modiffe/eval/projection.hpp"
#include "modiffe/pipeline/pipeline.hpp"

namespace fs = std::filesystem;
using namespace modiffe;
using nlohmann::json;
using pipeline::RunConfig;

namespace {

constexpr const char* kVersion = "0.1.0";

// ---- run directory bookkeeping ----------------------------------------

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    out << bytes;
    if (!out) throw IoError("write failed: " + p.string());
}

void write_json(const fs::path& p, const json& j) { write_file(p, j.dump(2) + "\n"); }

// manifest.json lists every artifact in the run directory with its size
// and FNV-1a hash, plus the subcommands that produced them (in order).
class RunDir {
public:
    explicit RunDir(const std::string& dir) : root_(dir) {
        if (dir.empty()) throw ParameterError("--out is required");
        std::error_code ec;
        fs::create_directories(root_, ec);
        if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
        const fs::path m = root_ / "manifest.json";
        if (fs::exists(m)) {
            try {
                manifest_ = json::parse(read_file(m));
            } catch (const json::exception& e) {
                throw IoError(m.string() + ": " + e.what());
            }
        } else {
            manifest_ = {{"tool", "modiffe"}, {"version", kVersion}, {"commands", json::array()},
                         {"artifacts", json::object()}};
        }
    }

    fs::path path(const std::string& name) const { return root_ / name; }
    bool has(const std::string& name) const { return fs::exists(root_ / name); }

    void record(const std::string& name) {
        const std::string bytes = read_file(path(name));
        manifest_["artifacts"][name] = {{"bytes", bytes.size()}, {"fnv1a64", nn::detail::hex64(nn::detail::fnv1a(bytes))}};
    }

    void put(const std::string& name, const std::string& bytes) {
        write_file(path(name), bytes);
        record(name);
    }
    void put_json(const std::string& name, const json& j) { put(name, j.dump(2) + "\n"); }
    void put_checkpoint(const std::string& name, const nn::Checkpoint& ck) { put(name, nn::serialize(ck)); }

    nn::Checkpoint checkpoint(const std::string& name, const char* stage_label) const {
        if (!has(name))
            throw OrderingError(std::string(stage_label) + " checkpoint missing: " + path(name).string() +
                                " (run the earlier training stage first)");
        return nn::load_checkpoint(path(name).string());
    }

    void finish(const std::string& command) {
        manifest_["commands"].push_back(command);
        write_json(root_ / "manifest.json", manifest_);
    }

private:
    fs::path root_;
    json manifest_;
};

// ---- shared options -----------------------------------------------------

struct Common {
    std::string out;
    std::string config_file;
    std::string data_dir;
    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::string schedule;
    std::optional<int> steps, sample_steps;
    std::optional<std::size_t> top_n;
    std::optional<double> eta, beta_alpha;
};

void add_out(CLI::App* app, Common& c) { app->add_option("--out", c.out, "Run directory for all artifacts")->required(); }

void add_run_options(CLI::App* app, Common& c) {
    app->add_option("--config", c.config_file, "JSON config file (keys listed in --help of the main program)");
    app->add_option("--data", c.data_dir, "Dataset directory (from `ingest` or `synth`); default: synthetic");
    app->add_option("--scenario", c.scenario, "cold | all | warm (default cold)");
    app->add_option("--seed", c.seed, "Seed for splits, initialisation and sampling (default 7)");
    app->add_option("--schedule", c.schedule, "Noise schedule: linear | cosine | exp (default linear)");
    app->add_option("--T", c.steps, "Diffusion steps T (default 500)");
    app->add_option("--T-prime", c.sample_steps, "Sampling steps T' (default 20)");
    app->add_option("--top-n", c.top_n, "Anchor neighbours n (default 5)");
    app->add_option("--eta", c.eta, "Pseudo-to-real triple ratio (default: 0 warm, 0.3 all, 0.5 cold)");
    app->add_option("--beta-alpha", c.beta_alpha, "Beta(alpha, alpha) interpolation parameter (default 0.9)");
}

// Defaults, then the run's stored config, then --config, then flags.
RunConfig resolve_config(const Common& c, const RunDir* run) {
    RunConfig cfg;
    if (run && run->has("config.json")) pipeline::apply_json(cfg, json::parse(read_file(run->path("config.json"))));
    if (!c.config_file.empty()) {
        std::ifstream in(c.config_file);
        if (!in) throw IoError("cannot open config " + c.config_file);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw IoError(c.config_file + ": " + e.what());
        }
        pipeline::apply_json(cfg, j);
    }
    if (!c.data_dir.empty()) cfg.data_dir = c.data_dir;
    if (!c.scenario.empty()) cfg.scenario = data::parse_scenario(c.scenario);
    if (c.seed) cfg.seed = *c.seed;
    if (!c.schedule.empty()) cfg.schedule = diffusion::parse_schedule(c.schedule);
    if (c.steps) cfg.steps = *c.steps;
    if (c.sample_steps) cfg.sample_steps = *c.sample_steps;
    if (c.top_n) cfg.top_n = *c.top_n;
    if (c.eta) cfg.eta = *c.eta;
    if (c.beta_alpha) cfg.beta_alpha = *c.beta_alpha;
    cfg.resolve();
    cfg.validate();
    return cfg;
}

std::string config_help() {
    RunConfig defaults;
    defaults.resolve();
    std::ostringstream os;
    os << "Config keys (JSON, nested objects shown with dots) and defaults:\n";
    std::function<void(const json&, const std::string&)> walk = [&](const json& j, const std::string& prefix) {
        for (const auto& [k, v] : j.items()) {
            if (v.is_object()) {
                walk(v, prefix + k + ".");
            } else {
                os << "  " << std::left << std::setw(28) << (prefix + k) << v.dump() << '\n';
            }
        }
    };
    walk(pipeline::to_json(defaults), "");
    os << "Per-stage seed, eta, beta_alpha, dim, layers and eval_k follow the top-level values.\n"
          "Exit codes: 0 success, 2 contract/ordering error, 1 I/O error.";
    return os.str();
}

void print_stats_table(std::ostream& os, const data::ColdStats& st) {
    os << std::left << std::setw(22) << "situation" << std::right << std::setw(9) << "bundles" << std::setw(9)
       << "ratio" << std::setw(12) << "within_bint" << std::setw(12) << "test_inter" << std::setw(12) << "test_share"
       << '\n';
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            os << std::left << std::setw(22) << data::situation_name(i, j) << std::right << std::setw(9)
               << st.count[i][j] << std::setw(9) << std::fixed << std::setprecision(4) << st.ratio[i][j]
               << std::setw(12) << st.ratio_within_bint[i][j] << std::setw(12) << st.test_interactions[i][j]
               << std::setw(12) << st.test_share[i][j] << '\n';
    os << "bundles " << st.n_bundles << ", test interactions " << st.n_test << ", cold items " << st.n_cold_items
       << '\n';
    os.unsetf(std::ios::floatfield);
}

void log_line(const std::string& s) { std::cerr << s << '\n'; }

// ---- subcommands ---------------------------------------------------------

struct SynthOpts {
    data::SynthParams p;
    std::optional<double> cross;
};

void cmd_synth(const Common& c, SynthOpts o) {
    RunDir run(c.out);
    if (o.cross) o.p.cross = o.cross;
    const auto r = data::synth_blockmodel(o.p);
    for (const auto& w : r.warnings) log_line("warning: " + w);
    data::save_dataset(r.dataset, c.out);
    for (const char* f : {data::kUserBundleFile, data::kUserItemFile, data::kBundleItemFile, data::kCatalogFile})
        run.record(f);
    std::ostringstream groups;
    groups << "entity\tid\tgroup\n";
    for (std::size_t i = 0; i < r.user_group.size(); ++i) groups << "user\t" << i << '\t' << r.user_group[i] << '\n';
    for (std::size_t i = 0; i < r.bundle_group.size(); ++i) groups << "bundle\t" << i << '\t' << r.bundle_group[i] << '\n';
    for (std::size_t i = 0; i < r.item_group.size(); ++i) groups << "item\t" << i << '\t' << r.item_group[i] << '\n';
    run.put("groups.tsv", groups.str());
    run.put_json("synth.json", {{"params", data::to_json(o.p)}, {"warnings", r.warnings},
                                {"catalog", data::to_json(r.dataset.catalog)}, {"x", r.dataset.x.size()},
                                {"y", r.dataset.y.size()}, {"z", r.dataset.z.size()}});
    run.finish("synth");
    std::cout << "users " << r.dataset.catalog.n_users << ", bundles " << r.dataset.catalog.n_bundles << ", items "
              << r.dataset.catalog.n_items << "; |X| " << r.dataset.x.size() << ", |Y| " << r.dataset.y.size()
              << ", |Z| " << r.dataset.z.size() << '\n';
}

void cmd_ingest(const Common& c, const std::string& ub, const std::string& ui, const std::string& bi) {
    RunDir run(c.out);
    const auto r = data::ingest_raw(ub, ui, bi);
    data::save_dataset(r.dataset, c.out);
    data::write_idmap(r.ids, run.path(data::kIdMapFile).string());
    for (const char* f : {data::kUserBundleFile, data::kUserItemFile, data::kBundleItemFile, data::kCatalogFile,
                          data::kIdMapFile})
        run.record(f);
    run.finish("ingest");
    std::cout << "users " << r.dataset.catalog.n_users << ", bundles " << r.dataset.catalog.n_bundles << ", items "
              << r.dataset.catalog.n_items << "; |X| " << r.dataset.x.size() << ", |Y| " << r.dataset.y.size()
              << ", |Z| " << r.dataset.z.size() << '\n';
}

void cmd_stats(const Common& c) {
    RunDir run(c.out);
    const auto ctx = pipeline::make_context(resolve_config(c, nullptr));
    const auto st = data::cold_stats(ctx.split);
    json j = data::to_json(st);
    j["scenario"] = data::to_string(ctx.split.scenario);
    j["catalog"] = data::to_json(ctx.dataset.catalog);
    run.put_json("stats.json", j);
    run.finish("stats");
    print_stats_table(std::cout, st);
}

void cmd_split(const Common& c) {
    RunDir run(c.out);
    const auto ctx = pipeline::make_context(resolve_config(c, nullptr));
    const fs::path dir = run.path("split");
    data::save_split(ctx.split, dir.string());
    for (const char* f : {"train.tsv", "val.tsv", "test.tsv", data::kLabelsFile}) run.record(std::string("split/") + f);
    run.finish("split");
    std::cout << "train " << ctx.split.train_x.size() << ", val " << ctx.split.val_x.size() << ", test "
              << ctx.split.test_x.size() << '\n';
}

constexpr const char* kS1 = "stage1.ckpt";
constexpr const char* kS2 = "stage2.ckpt";
constexpr const char* kS3 = "stage3.ckpt";
constexpr const char* kS3NoAug = "stage3_noaug.ckpt";

void cmd_train(const Common& c, const std::string& stage, bool no_aug) {
    if (stage != "1" && stage != "2" && stage != "3" && stage != "all")
        throw ParameterError("train: stage must be 1, 2, 3 or all");
    RunDir run(c.out);
    const RunConfig cfg = resolve_config(c, &run);
    const auto ctx = pipeline::make_context(cfg);
    for (const auto& w : ctx.warnings) log_line("warning: " + w);
    run.put_json("config.json", pipeline::to_json(cfg));
    const pipeline::Logger log = log_line;

    if (stage == "1" || stage == "all") run.put_checkpoint(kS1, pipeline::run_stage1(ctx, log));
    if (stage == "2" || stage == "all") {
        const auto s1 = run.checkpoint(kS1, "stage-1");
        run.put_checkpoint(kS2, pipeline::run_stage2(ctx, s1, log));
    }
    if (stage == "3" || stage == "all") {
        const auto s1 = run.checkpoint(kS1, "stage-1");
        const auto s2 = run.checkpoint(kS2, "stage-2");
        if (stage == "all" || !no_aug) run.put_checkpoint(kS3, pipeline::run_stage3(ctx, s1, s2, false, log));
        if (stage == "all" || no_aug) run.put_checkpoint(kS3NoAug, pipeline::run_stage3(ctx, s1, s2, true, log));
    }
    run.finish("train " + stage + (no_aug ? " --no-aug" : ""));
}

struct Ablation {
    bool no_aug = false, no_moe = false, no_diff = false;

    pipeline::Variant variant() const {
        if (int(no_aug) + int(no_moe) + int(no_diff) > 1)
            throw ParameterError("eval: choose at most one of --no-aug, --no-moe, --no-diff");
        if (no_aug) return pipeline::Variant::NoAug;
        if (no_moe) return pipeline::Variant::NoMoe;
        if (no_diff) return pipeline::Variant::NoDiff;
        return pipeline::Variant::Full;
    }
};

struct Scored {
    pipeline::Context ctx;
    pipeline::Variant variant;
    nn::Matrix scores;
};

Scored score_run(const Common& c, RunDir& run, const Ablation& a) {
    const auto variant = a.variant();
    Scored out{pipeline::make_context(resolve_config(c, &run)), variant, {}};
    const auto s1 = run.checkpoint(kS1, "stage-1");
    const auto reps = pipeline::prior_reps(out.ctx, s1);
    if (variant == pipeline::Variant::NoDiff) {
        const auto ex = pipeline::expert_outputs(out.ctx, reps, nn::Matrix::Zero(reps.bint.entity_rep.rows(), reps.bint.entity_rep.cols()),
                                                 nn::Matrix::Zero(reps.iint.entity_rep.rows(), reps.iint.entity_rep.cols()));
        out.scores = pipeline::no_diff_scores(ex, out.ctx.split.z);
        return out;
    }
    const auto s2 = run.checkpoint(kS2, "stage-2");
    const auto ex = pipeline::expert_outputs(out.ctx, s1, s2);
    if (variant == pipeline::Variant::NoMoe) {
        out.scores = pipeline::no_moe_scores(ex, out.ctx.split.z);
        return out;
    }
    const auto s3 = variant == pipeline::Variant::NoAug ? run.checkpoint(kS3NoAug, "stage-3 (eta = 0)")
                                                        : run.checkpoint(kS3, "stage-3");
    pipeline::require_parent(s3, s2);
    out.scores = moe::moe_scores(ex, pipeline::gate_params(s3));
    return out;
}

std::string variant_suffix(pipeline::Variant v) {
    return v == pipeline::Variant::Full ? "" : std::string("_") + pipeline::to_string(v);
}

void cmd_eval(const Common& c, const Ablation& a) {
    RunDir run(c.out);
    const auto s = score_run(c, run, a);
    const auto rep = pipeline::evaluate_scores(s.ctx, s.variant, s.scores);
    const std::string name = "metrics" + variant_suffix(s.variant) + ".json";
    run.put_json(name, pipeline::to_json(s.ctx, rep));
    run.finish("eval" + (s.variant == pipeline::Variant::Full ? std::string() : std::string(" --") + pipeline::to_string(s.variant)));
    std::cout << std::left << std::setw(10) << "bundles" << std::setw(12) << "recall@" + std::to_string(rep.all.k)
              << std::setw(12) << "ndcg" << std::setw(8) << "users" << "random\n";
    for (const auto* r : {&rep.all, &rep.cold, &rep.warm})
        std::cout << std::left << std::setw(10) << eval::to_string(r->filter) << std::setw(12) << r->recall
                  << std::setw(12) << r->ndcg << std::setw(8) << r->users << r->random_baseline() << '\n';
}

void cmd_hits(const Common& c, const Ablation& a) {
    RunDir run(c.out);
    const auto s = score_run(c, run, a);
    const auto rep = eval::evaluate(s.scores, s.ctx.split, s.ctx.config.k);
    std::ostringstream csv;
    csv << "situation,hits\n";
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) csv << data::situation_name(i, j) << ',' << rep.hits[i][j] << '\n';
    csv << "total," << rep.total_hits << '\n';
    run.put("hits" + variant_suffix(s.variant) + ".csv", csv.str());
    run.finish("hits");
    std::cout << csv.str();
}

void cmd_gates(const Common& c, bool no_aug) {
    RunDir run(c.out);
    const auto ctx = pipeline::make_context(resolve_config(c, &run));
    const auto s1 = run.checkpoint(kS1, "stage-1");
    const auto s2 = run.checkpoint(kS2, "stage-2");
    const auto s3 = no_aug ? run.checkpoint(kS3NoAug, "stage-3 (eta = 0)") : run.checkpoint(kS3, "stage-3");
    pipeline::require_parent(s3, s2);
    const auto ex = pipeline::expert_outputs(ctx, s1, s2);
    const auto t = moe::fuse_all(ex, pipeline::gate_params(s3));
    std::ostringstream csv, out_csv;
    csv << std::setprecision(17) << "entity_class,id,view,w_embed,w_diff\n";
    for (Eigen::Index b = 0; b < t.bint_weights.rows(); ++b)
        csv << (ctx.split.bint_cold(static_cast<data::Id>(b)) ? "bundle_bint_cold" : "bundle_bint_warm") << ',' << b
            << ",bint," << t.bint_weights(b, 0) << ',' << t.bint_weights(b, 1) << '\n';
    for (Eigen::Index i = 0; i < t.item_weights.rows(); ++i)
        csv << (ctx.split.item_cold(static_cast<data::Id>(i)) ? "item_cold" : "item_warm") << ',' << i << ",iint,"
            << t.item_weights(i, 0) << ',' << t.item_weights(i, 1) << '\n';
    out_csv << std::setprecision(17) << "bundle,situation,g_bint,g_iint\n";
    for (Eigen::Index b = 0; b < t.out.rows(); ++b) {
        const auto id = static_cast<data::Id>(b);
        out_csv << b << ',' << data::situation_name(ctx.split.bint_cold(id), ctx.split.iint_cold(id)) << ','
                << t.out(b, 0) << ',' << t.out(b, 1) << '\n';
    }
    const std::string suffix = no_aug ? "_no_aug" : "";
    run.put("gates" + suffix + ".csv", csv.str());
    run.put("output_gates" + suffix + ".csv", out_csv.str());
    run.finish("gates");

    double sum[2] = {0, 0};
    std::size_t n[2] = {0, 0};
    for (Eigen::Index b = 0; b < t.bint_weights.rows(); ++b) {
        const int cold = ctx.split.bint_cold(static_cast<data::Id>(b)) ? 1 : 0;
        sum[cold] += t.bint_weights(b, 1);
        ++n[cold];
    }
    std::cout << "mean bint w_diff: warm " << (n[0] ? sum[0] / double(n[0]) : 0.0) << " (" << n[0] << "), cold "
              << (n[1] ? sum[1] / double(n[1]) : 0.0) << " (" << n[1] << ")\n";
}

void cmd_project(const Common& c, const std::string& what) {
    RunDir run(c.out);
    const auto ctx = pipeline::make_context(resolve_config(c, &run));
    const auto s1 = run.checkpoint(kS1, "stage-1");
    const auto reps = pipeline::prior_reps(ctx, s1);
    nn::Matrix table;
    std::vector<std::string> labels;
    const bool bundles = what.rfind("bundle", 0) == 0;
    if (what == "bundle-embed") {
        table = reps.bint.entity_rep;
    } else if (what == "item-embed") {
        table = reps.iint.entity_rep;
    } else if (what == "bundle-diff" || what == "item-diff") {
        const auto dx = pipeline::diffusion_experts(ctx, s1, run.checkpoint(kS2, "stage-2"));
        table = bundles ? dx.bundle_diff : dx.item_diff;
    } else {
        throw ParameterError("project: --what must be bundle-embed, bundle-diff, item-embed or item-diff");
    }
    for (Eigen::Index r = 0; r < table.rows(); ++r) {
        const auto id = static_cast<data::Id>(r);
        if (bundles)
            labels.emplace_back(ctx.split.bint_cold(id) ? "bint_cold" : "bint_warm");
        else
            labels.emplace_back(ctx.split.item_cold(id) ? "item_cold" : "item_warm");
    }
    const auto p = eval::project_2d(table, ctx.config.seed);
    for (const auto& w : p.warnings) log_line("warning: " + w);
    const std::string name = "projection_" + what + ".csv";
    eval::write_projection_csv(p, labels, run.path(name).string());
    run.record(name);
    run.finish("project " + what);
    std::cout << "rows " << table.rows() << ", explained variance " << p.explained(0) << " / " << p.explained(1)
              << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"modiffe: cold-start bundle recommendation with diffusion experts"};
    app.footer(config_help());
    app.require_subcommand(1);
    Common c;

    auto* synth = app.add_subcommand("synth", "Generate a planted block-model dataset");
    SynthOpts so;
    add_out(synth, c);
    synth->add_option("--users", so.p.n_users, "Users")->capture_default_str();
    synth->add_option("--items", so.p.n_items, "Items")->capture_default_str();
    synth->add_option("--bundles", so.p.n_bundles, "Bundles")->capture_default_str();
    synth->add_option("--groups", so.p.groups, "Latent groups")->capture_default_str();
    synth->add_option("--bundle-size", so.p.bundle_size, "Items per bundle")->capture_default_str();
    synth->add_option("--affinity", so.p.affinity, "In-group edge probability")->capture_default_str();
    synth->add_option("--cross", so.cross, "Cross-group edge probability (default affinity/10)");
    synth->add_option("--seed", so.p.seed, "Generator seed")->capture_default_str();

    auto* ingest = app.add_subcommand("ingest", "Densify raw tab-separated interaction files");
    std::string ub, ui, bi;
    add_out(ingest, c);
    ingest->add_option("--user-bundle", ub, "Raw user<TAB>bundle file")->required();
    ingest->add_option("--user-item", ui, "Raw user<TAB>item file")->required();
    ingest->add_option("--bundle-item", bi, "Raw bundle<TAB>item file")->required();

    auto* stats = app.add_subcommand("stats", "Cold-situation statistics of a scenario split");
    add_out(stats, c);
    add_run_options(stats, c);

    auto* split = app.add_subcommand("split", "Write the train/val/test split of a scenario");
    add_out(split, c);
    add_run_options(split, c);

    auto* train = app.add_subcommand("train", "Train stage 1, 2, 3 or all of them");
    std::string stage;
    bool train_no_aug = false;
    add_out(train, c);
    add_run_options(train, c);
    train->add_option("stage", stage, "1 | 2 | 3 | all")->required();
    train->add_flag("--no-aug", train_no_aug, "Stage 3 only: train the eta = 0 gates");

    Ablation ab;
    auto add_ablation = [&](CLI::App* sub) {
        sub->add_flag("--no-aug", ab.no_aug, "Gates trained with eta = 0");
        sub->add_flag("--no-moe", ab.no_moe, "Sum expert outputs with equal weight");
        sub->add_flag("--no-diff", ab.no_diff, "Prior experts only");
    };
    auto* evalc = app.add_subcommand("eval", "Recall@K / NDCG@K on the test split");
    add_out(evalc, c);
    add_run_options(evalc, c);
    add_ablation(evalc);

    auto* hits = app.add_subcommand("hits", "Top-K hit counts by cold situation (CSV)");
    add_out(hits, c);
    add_run_options(hits, c);
    add_ablation(hits);

    auto* gates = app.add_subcommand("gates", "Per-entity gate weights (CSV)");
    bool gates_no_aug = false;
    add_out(gates, c);
    add_run_options(gates, c);
    gates->add_flag("--no-aug", gates_no_aug, "Dump the eta = 0 gates");

    auto* project = app.add_subcommand("project", "2-D PCA projection of a representation table (CSV)");
    std::string what = "bundle-embed";
    add_out(project, c);
    add_run_options(project, c);
    project->add_option("--what", what, "bundle-embed | bundle-diff | item-embed | item-diff")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*synth) cmd_synth(c, so);
        else if (*ingest) cmd_ingest(c, ub, ui, bi);
        else if (*stats) cmd_stats(c);
        else if (*split) cmd_split(c);
        else if (*train) cmd_train(c, stage, train_no_aug);
        else if (*evalc) cmd_eval(c, ab);
        else if (*hits) cmd_hits(c, ab);
        else if (*gates) cmd_gates(c, gates_no_aug);
        else if (*project) cmd_project(c, what);
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
