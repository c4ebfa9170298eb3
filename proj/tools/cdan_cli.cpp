// cdan_cli: dataset generation, training, evaluation, shift diagnostics and
// table reproduction.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cdan/copula.hpp"
#include "cdan/datasets.hpp"
#include "cdan/divergences.hpp"
#include "cdan/nn.hpp"
#include "cdan/tasks.hpp"
#include "cdan/trainer.hpp"

using namespace cdan;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// exit codes
constexpr int kOk = 0;
constexpr int kRunFailed = 1;
constexpr int kBadInput = 2;

struct Overrides {
    std::string config_path;
    std::optional<std::string> method;
    std::optional<double> alpha, beta, lambda, lr, tanh_a;
    std::optional<std::size_t> epochs, batch;
    std::optional<std::string> h1, h2;
};

void add_override_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config_path, "JSON config file (flags take precedence)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--method", o.method, "mlp, dan, coral or cdan")
        ->check(CLI::IsMember({"mlp", "dan", "coral", "cdan"}));
    cmd->add_option("--alpha", o.alpha, "marginal divergence weight");
    cmd->add_option("--beta", o.beta, "copula distance weight");
    cmd->add_option("--lambda", o.lambda, "DAN / CORAL penalty weight");
    cmd->add_option("--lr", o.lr, "Adam learning rate");
    cmd->add_option("--epochs", o.epochs, "maximum epochs");
    cmd->add_option("--batch", o.batch, "minibatch size (even)");
    cmd->add_option("--h1", o.h1, "marginal divergence")->check(CLI::IsMember({"mmd", "w1", "kl"}));
    cmd->add_option("--h2", o.h2, "dependence divergence")->check(CLI::IsMember({"kl", "chi2", "w2", "mmd"}));
    cmd->add_option("--tanh-a", o.tanh_a, "smoothed Kendall tau sharpness");
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

/// Config file keys first, then command-line flags. Keys in `fixed` are
/// controlled by the caller and skipped.
void overlay(TrainConfig& c, const Overrides& o, const std::vector<std::string>& fixed = {}) {
    auto skip = [&](const std::string& k) { return std::find(fixed.begin(), fixed.end(), k) != fixed.end(); };
    if (!o.config_path.empty()) {
        json j = read_json(o.config_path);
        if (j.is_object())
            for (const auto& k : fixed) j.erase(k);
        config_update_from_json(c, j);
    }
    if (o.alpha && !skip("alpha")) c.alpha = *o.alpha;
    if (o.beta && !skip("beta")) c.beta = *o.beta;
    if (o.lambda && !skip("lambda")) c.lambda = *o.lambda;
    if (o.lr) c.learning_rate = *o.lr;
    if (o.epochs) c.max_epochs = *o.epochs;
    if (o.batch) c.batch_size = *o.batch;
    if (o.tanh_a) c.tanh_a = *o.tanh_a;
    if (o.h1 && !skip("h1")) c.h1 = DivergenceKind{marginal_kind_from_string(*o.h1), {}, c.h1.bins};
    if (o.h2 && !skip("h2")) c.h2.tag = dependence_kind_from_string(*o.h2);
}

// ------------------------------------------------------------------ tasks

struct TaskOptions {
    std::string task = "moons";
    double stretch = 3.0;
    double noise = 0.05;
    std::size_t n_per_class = 512;
    std::string wine_dir;
    std::string source, target, label = "label";
};

void add_task_flags(CLI::App* cmd, TaskOptions& t) {
    cmd->add_option("--task", t.task, "moons, wine-w2r, wine-r2w or files")
        ->check(CLI::IsMember({"moons", "wine-w2r", "wine-r2w", "files"}));
    cmd->add_option("--stretch", t.stretch, "moons target stretch");
    cmd->add_option("--noise", t.noise, "moons noise sigma");
    cmd->add_option("--n", t.n_per_class, "moons samples per class");
    cmd->add_option("--wine-dir", t.wine_dir, "directory with the wine CSV files");
    cmd->add_option("--source", t.source, "source CSV (task files)");
    cmd->add_option("--target", t.target, "target CSV (task files)");
    cmd->add_option("--label", t.label, "label column of --source/--target");
}

fs::path resolve_wine_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    return wine_dir("data/wine");
}

WineData load_wine_or_explain(const std::string& flag) {
    const auto dir = resolve_wine_dir(flag);
    for (const char* f : {"winequality-red.csv", "winequality-white.csv"})
        if (!fs::exists(dir / f))
            throw ConfigError((dir / f).string() + " not found; run tools/fetch_wine.sh or set CDAN_WINE_DIR");
    return load_wine(dir);
}

struct ResolvedTask {
    TaskFactory make;
    TrainConfig defaults;
    json description;
};

ResolvedTask resolve_task(const TaskOptions& t, Method m) {
    if (t.task == "moons") {
        const double s = t.stretch, sigma = t.noise;
        const std::size_t n = t.n_per_class;
        return {[=](std::uint64_t seed) { return moons_task(s, seed, sigma, n); }, moons_config(m),
                {{"task", "moons"}, {"stretch", s}, {"noise", sigma}, {"n_per_class", n}}};
    }
    if (t.task == "wine-w2r" || t.task == "wine-r2w") {
        auto wine = std::make_shared<WineData>(load_wine_or_explain(t.wine_dir));
        const bool r2w = t.task == "wine-r2w";
        return {[wine, r2w](std::uint64_t) { return wine_task(*wine, r2w); }, wine_config(m, wine->red.dim()),
                {{"task", t.task}, {"wine_dir", resolve_wine_dir(t.wine_dir).string()}}};
    }
    if (t.source.empty() || t.target.empty()) throw ConfigError("task files: --source and --target are required");
    auto src = std::make_shared<Dataset>(load_delimited(t.source, ',', t.label));
    auto tgt = std::make_shared<Dataset>(load_delimited(t.target, ',', t.label));
    tgt->domain = Domain::target;
    TrainConfig c;
    c.method = m;
    apply_method_defaults(c);
    c.model.input_dim = src->dim();
    int top = 0;
    for (int y : src->class_labels()) top = std::max(top, y);
    c.model.classes = static_cast<std::size_t>(top) + 1;
    return {[src, tgt](std::uint64_t) { return TaskData{*src, *tgt, std::nullopt}; }, c,
            {{"task", "files"}, {"source", t.source}, {"target", t.target}}};
}

Method pick_method(const Overrides& o) {
    if (o.method) return method_from_string(*o.method);
    if (!o.config_path.empty()) {
        const json j = read_json(o.config_path);
        if (j.is_object() && j.contains("method") && j["method"].is_string())
            return method_from_string(j["method"].get<std::string>());
    }
    return Method::cdan;
}

void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path);
    if (!out) throw ConfigError(path + ": cannot open for writing");
    out << body;
}

std::vector<std::uint64_t> seed_list(std::uint64_t first, std::size_t count) {
    if (count == 0) throw ConfigError("--seeds: must be >= 1");
    std::vector<std::uint64_t> s(count);
    for (std::size_t i = 0; i < count; ++i) s[i] = first + i;
    return s;
}

// ------------------------------------------------------------------ verbs

struct MoonsGen {
    double stretch = 1.0, noise = 0.05;
    std::size_t n = 512;
    std::uint64_t seed = 0;
    std::string out;
};

int run_moons_gen(const MoonsGen& g) {
    const MoonsConfig cfg{g.n, g.stretch, g.noise, g.seed};
    const auto d = generate_moons(cfg);
    const json header = {{"generator", "moons"}, {"n_per_class", g.n}, {"stretch", g.stretch},
                         {"noise", g.noise},     {"seed", g.seed}};
    write_csv(d, g.out, header.dump());
    std::printf("wrote %zu rows to %s\n", d.size(), g.out.c_str());
    return kOk;
}

struct TrainArgs {
    Overrides o;
    TaskOptions t;
    std::uint64_t seed = 0;
    std::string out = "model.json";
    std::string trace_out;
};

int run_train(const TrainArgs& a) {
    const Method m = pick_method(a.o);
    auto task = resolve_task(a.t, m);
    TrainConfig c = task.defaults;
    overlay(c, a.o, {"method"});
    c.seed = a.seed;
    c.validate();
    const TaskData data = task.make(a.seed);
    const auto res = train(data.source, data.target.without_labels(), c);

    const json meta = {{"config", config_to_json(c)}, {"seed", a.seed}, {"task", task.description}};
    json ckpt = meta;
    ckpt["params"] = params_to_json(res.params);
    ckpt["best_epoch"] = res.best_epoch;
    write_text(a.out, ckpt.dump(2));
    json trace = meta;
    trace["trace"] = trace_to_json(res.trace);
    trace["stopped_early"] = res.stopped_early;
    const std::string trace_path = a.trace_out.empty() ? a.out + ".trace.json" : a.trace_out;
    write_text(trace_path, trace.dump(2));
    std::printf("trained %zu epochs (best %zu); wrote %s and %s\n", res.trace.size(), res.best_epoch,
                a.out.c_str(), trace_path.c_str());
    return kOk;
}

struct EvalArgs {
    Overrides o;
    TaskOptions t;
    std::size_t seeds = 10;
    std::uint64_t first_seed = 0;
    std::string checkpoint, out;
    bool traces = false;
};

int run_eval(const EvalArgs& a) {
    json rep;
    if (!a.checkpoint.empty()) {
        const json ck = read_json(a.checkpoint);
        if (!ck.contains("params") || !ck.contains("config"))
            throw ConfigError(a.checkpoint + ": not a checkpoint written by 'train'");
        const auto params = params_from_json(ck["params"]);
        const TrainConfig c = config_from_json(ck["config"]);
        // the task recorded in the checkpoint wins over task flags
        TaskOptions opts = a.t;
        if (ck.contains("task") && ck["task"].is_object()) {
            const auto& d = ck["task"];
            opts.task = d.value("task", opts.task);
            opts.stretch = d.value("stretch", opts.stretch);
            opts.noise = d.value("noise", opts.noise);
            opts.n_per_class = d.value("n_per_class", opts.n_per_class);
            if (a.t.wine_dir.empty()) opts.wine_dir = d.value("wine_dir", std::string{});
            opts.source = d.value("source", opts.source);
            opts.target = d.value("target", opts.target);
        }
        auto task = resolve_task(opts, c.method);
        const std::uint64_t seed = ck.value("seed", std::uint64_t{0});
        const TaskData data = task.make(seed);
        MetricsReport r{task.description.value("task", "task"), c, {}, {}};
        SeedResult sr{seed, {}, {}};
        if (params.spec.output == OutputKind::classification) {
            const auto m = evaluate_classification(params, data.target);
            sr.metrics = {{"accuracy", m.accuracy}, {"auc", m.auc}};
        } else {
            if (!data.scaler) throw ConfigError("eval: regression checkpoint needs a wine task");
            const auto m = evaluate_regression(params, data.target, *data.scaler);
            sr.metrics = {{"rmse", m.rmse}, {"r2", m.r2}, {"re", m.re}};
        }
        const auto shift = learned_feature_shift(params, data.source, data.target, c);
        sr.metrics["feature_md"] = shift.md;
        sr.metrics["feature_cd"] = shift.cd;
        r.per_seed.push_back(std::move(sr));
        r.recompute_aggregate();
        rep = report_to_json(r);
        rep["task_options"] = task.description;
        rep["checkpoint"] = a.checkpoint;
    } else {
        const Method m = pick_method(a.o);
        auto task = resolve_task(a.t, m);
        TrainConfig c = task.defaults;
        overlay(c, a.o, {"method"});
        c.validate();
        const auto seeds = seed_list(a.first_seed, a.seeds);
        rep = report_to_json(run_experiment(task.description.value("task", "task"), task.make, c, seeds), a.traces);
        rep["task_options"] = task.description;
    }
    const std::string text = rep.dump(2);
    std::puts(text.c_str());
    if (!a.out.empty()) write_text(a.out, text + "\n");
    return kOk;
}

struct ShiftArgs {
    std::string a, b;
    std::string label = "label";
    std::string h1 = "mmd", h2 = "kl";
    double beta = 1.0;
    double tanh_a = kDefaultTanhA;
    std::string out, csv;
};

int run_shift_report(const ShiftArgs& s) {
    auto load = [&](const std::string& path) {
        try {
            return load_delimited(path, ',', s.label);
        } catch (const ConfigError&) {
            // files without the label column are compared on all columns
            return load_delimited(path, ',');
        }
    };
    const Dataset a = load(s.a), b = load(s.b);
    const DivergenceKind h1{marginal_kind_from_string(s.h1), {}, 32};
    const DependenceDivergenceKind h2{dependence_kind_from_string(s.h2)};
    const auto r = shift_report(a, b, h1, h2, PairWeights::uniform(a.dim(), s.beta), s.tanh_a);

    const json settings = {{"a", s.a}, {"b", s.b}, {"h1", s.h1}, {"h2", s.h2}, {"beta", s.beta}, {"tanh_a", s.tanh_a}};
    json j = {{"config", settings}, {"md", r.md}, {"cd", r.cd ? json(*r.cd) : json(nullptr)}};
    std::ostringstream csv;
    csv.precision(17);
    csv << "# " << settings.dump() << "\nquantity,feature,value\n";
    for (std::size_t i = 0; i < r.md.size(); ++i) csv << "md," << i << ',' << r.md[i] << '\n';
    if (r.cd) csv << "cd,," << *r.cd << '\n';

    std::puts(j.dump(2).c_str());
    std::fputs(csv.str().c_str(), stdout);
    if (!s.out.empty()) write_text(s.out, j.dump(2) + "\n");
    if (!s.csv.empty()) write_text(s.csv, csv.str());
    return kOk;
}

// -------------------------------------------------------------- reproduce

struct ReproArgs {
    std::string table;
    Overrides o;
    std::optional<std::size_t> seeds;
    std::uint64_t first_seed = 0;
    std::string wine_dir;
    std::string out;
};

std::string pm(const Summary& s, double scale = 1.0, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f ± %.*f", digits, s.mean * scale, digits, s.std * scale);
    return buf;
}

// keys a table row controls itself: the method and the weights it must keep at zero
std::vector<std::string> fixed_keys(Method m) {
    switch (m) {
        case Method::cdan: return {"method", "lambda"};
        case Method::dan:
        case Method::coral: return {"method", "alpha", "beta"};
        case Method::mlp: break;
    }
    return {"method", "alpha", "beta", "lambda"};
}

struct Cell {
    std::string row, column;
    TrainConfig config;
    TaskFactory make;
};

int run_reproduce(const ReproArgs& a) {
    const auto seeds = seed_list(a.first_seed, a.seeds.value_or(a.table == "table3" ? 10 : 20));
    std::vector<Cell> cells;
    std::vector<std::string> rows, columns;
    std::vector<std::string> metrics;
    double scale = 1.0;
    int digits = 3;

    const Method methods[] = {Method::mlp, Method::dan, Method::coral, Method::cdan};
    auto upper = [](std::string s) {
        for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        return s;
    };

    if (a.table == "table3") {
        metrics = {"accuracy"};
        scale = 100.0;
        digits = 2;
        for (auto m : methods) rows.push_back(upper(to_string(m)));
        for (double s : {2.0, 3.0, 4.0, 5.0}) columns.push_back("k=" + std::to_string(static_cast<int>(s)));
        for (auto m : methods)
            for (double s : {2.0, 3.0, 4.0, 5.0}) {
                TrainConfig c = moons_config(m);
                overlay(c, a.o, fixed_keys(m));
                cells.push_back({upper(to_string(m)), "k=" + std::to_string(static_cast<int>(s)), c,
                                 [s](std::uint64_t seed) { return moons_task(s, seed); }});
            }
    } else {
        const auto wine = std::make_shared<WineData>(load_wine_or_explain(a.wine_dir));
        const std::pair<std::string, bool> dirs[] = {{"W→R", false}, {"R→W", true}};
        auto maker = [wine](bool r2w) -> TaskFactory {
            return [wine, r2w](std::uint64_t) { return wine_task(*wine, r2w); };
        };
        const std::size_t dim = wine->red.dim();
        if (a.table == "table6") {
            metrics = {"rmse", "r2", "re"};
            for (auto m : methods) rows.push_back(upper(to_string(m)));
            for (auto& [d, r2w] : dirs) columns.push_back(d);
            for (auto m : methods)
                for (auto& [d, r2w] : dirs) {
                    TrainConfig c = wine_config(m, dim);
                    overlay(c, a.o, fixed_keys(m));
                    cells.push_back({upper(to_string(m)), d, c, maker(r2w)});
                }
        } else if (a.table == "table7") {
            metrics = {"r2"};
            const std::pair<double, double> grid[] = {{0, 0},   {0, 0.1}, {0, 1}, {0, 10},
                                                      {0.1, 0}, {1, 0},   {10, 0}, {1, 1}};
            for (auto& [d, r2w] : dirs) columns.push_back(d);
            for (auto [al, be] : grid) {
                std::ostringstream name;
                name << '(' << al << ", " << be << ')';
                rows.push_back(name.str());
                for (auto& [d, r2w] : dirs) {
                    TrainConfig c = wine_config(Method::cdan, dim);
                    overlay(c, a.o, {"method", "alpha", "beta", "lambda"});
                    c.alpha = al;
                    c.beta = be;
                    cells.push_back({name.str(), d, c, maker(r2w)});
                }
            }
        } else if (a.table == "table8") {
            metrics = {"rmse", "r2", "re"};
            for (auto& [d, r2w] : dirs) columns.push_back(d);
            for (const char* h1 : {"mmd", "kl", "w1"})
                for (const char* h2 : {"kl", "w2", "chi2"}) {
                    const std::string name = upper(h1) + " + " + upper(h2);
                    rows.push_back(name);
                    for (auto& [d, r2w] : dirs) {
                        TrainConfig c = wine_config(Method::cdan, dim);
                        overlay(c, a.o, {"method", "lambda", "h1", "h2"});
                        c.h1 = DivergenceKind{marginal_kind_from_string(h1), {}, c.h1.bins};
                        c.h2.tag = dependence_kind_from_string(h2);
                        cells.push_back({name, d, c, maker(r2w)});
                    }
                }
        } else {
            throw ConfigError("reproduce: unknown table '" + a.table + "' (expected table3, table6, table7 or table8)");
        }
    }
    for (auto& c : cells) c.config.validate();

    // run every cell; failures are recorded and reported at the end
    std::map<std::pair<std::string, std::string>, MetricsReport> done;
    json raw = {{"table", a.table}, {"seeds", seeds}, {"cells", json::array()}};
    std::vector<std::string> errors;
    for (const auto& cell : cells) {
        std::fprintf(stderr, "[%s] %s / %s ...\n", a.table.c_str(), cell.row.c_str(), cell.column.c_str());
        try {
            auto rep = run_experiment(a.table, cell.make, cell.config, seeds);
            json j = report_to_json(rep);
            j["row"] = cell.row;
            j["column"] = cell.column;
            raw["cells"].push_back(std::move(j));
            done.emplace(std::pair{cell.row, cell.column}, std::move(rep));
        } catch (const std::exception& e) {
            errors.push_back(cell.row + " / " + cell.column + ": " + e.what());
            raw["cells"].push_back({{"row", cell.row}, {"column", cell.column}, {"error", e.what()},
                                    {"config", config_to_json(cell.config)}});
        }
    }
    raw["errors"] = errors;

    std::ostringstream md;
    md << "<!-- " << a.table << "; seeds " << seeds.front() << ".." << seeds.back()
       << "; per-cell configs in the JSON output -->\n";
    md << "| |";
    for (const auto& c : columns)
        for (const auto& m : metrics) md << ' ' << c << (metrics.size() > 1 || a.table == "table7" ? " " + upper(m) : "") << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < columns.size() * metrics.size(); ++i) md << "---|";
    md << '\n';
    for (const auto& r : rows) {
        md << "| " << r << " |";
        for (const auto& c : columns)
            for (const auto& m : metrics) {
                auto it = done.find({r, c});
                md << ' ' << (it == done.end() ? std::string("error") : pm(it->second.aggregate.at(m), scale, digits)) << " |";
            }
        md << '\n';
    }

    std::fputs(md.str().c_str(), stdout);
    if (!a.out.empty()) {
        write_text(a.out + ".md", md.str());
        write_text(a.out + ".json", raw.dump(2) + "\n");
    }
    for (const auto& e : errors) std::fprintf(stderr, "error: %s\n", e.c_str());
    return errors.empty() ? kOk : kRunFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Copula-based domain adaptation: data generation, training, evaluation and diagnostics"};
    app.require_subcommand(1);

    MoonsGen gen;
    auto* g = app.add_subcommand("moons-gen", "write a two-moons dataset as CSV");
    g->add_option("--stretch", gen.stretch, "horizontal stretch (>= 1)");
    g->add_option("--n", gen.n, "samples per class");
    g->add_option("--noise", gen.noise, "Gaussian noise sigma");
    g->add_option("--seed", gen.seed, "random seed");
    g->add_option("--out", gen.out, "output CSV")->required();

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "train one model; write checkpoint and trace JSON");
    add_override_flags(t, tr.o);
    add_task_flags(t, tr.t);
    t->add_option("--seed", tr.seed, "trial seed");
    t->add_option("--out", tr.out, "checkpoint JSON path");
    t->add_option("--trace-out", tr.trace_out, "trace JSON path (default <out>.trace.json)");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "train over seeds (or load --checkpoint) and print a metrics report");
    add_override_flags(e, ev.o);
    add_task_flags(e, ev.t);
    e->add_option("--seeds", ev.seeds, "number of seeds");
    e->add_option("--seed", ev.first_seed, "first seed");
    e->add_option("--checkpoint", ev.checkpoint, "evaluate a saved checkpoint instead of training")
        ->check(CLI::ExistingFile);
    e->add_option("--out", ev.out, "also write the report JSON here");
    e->add_flag("--traces", ev.traces, "include per-seed training traces");

    ShiftArgs sh;
    auto* s = app.add_subcommand("shift-report", "per-feature marginal divergence and copula distance of two CSVs");
    s->add_option("a", sh.a, "first CSV")->required()->check(CLI::ExistingFile);
    s->add_option("b", sh.b, "second CSV")->required()->check(CLI::ExistingFile);
    s->add_option("--label", sh.label, "label column to drop");
    s->add_option("--h1", sh.h1, "marginal divergence")->check(CLI::IsMember({"mmd", "w1", "kl"}));
    s->add_option("--h2", sh.h2, "dependence divergence")->check(CLI::IsMember({"kl", "chi2", "w2", "mmd"}));
    s->add_option("--beta", sh.beta, "uniform pair weight");
    s->add_option("--tanh-a", sh.tanh_a, "smoothed Kendall tau sharpness");
    s->add_option("--out", sh.out, "JSON output path");
    s->add_option("--csv", sh.csv, "flat CSV output path");

    ReproArgs rp;
    auto* r = app.add_subcommand("reproduce", "run a table's seeded experiment matrix");
    r->add_option("table", rp.table, "table3, table6, table7 or table8")
        ->required()
        ->check(CLI::IsMember({"table3", "table6", "table7", "table8"}));
    add_override_flags(r, rp.o);
    r->add_option("--seeds", rp.seeds, "number of seeds (default 10 for table3, else 20)");
    r->add_option("--seed", rp.first_seed, "first seed");
    r->add_option("--wine-dir", rp.wine_dir, "directory with the wine CSV files");
    r->add_option("--out", rp.out, "output prefix for <out>.md and <out>.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        if (code != 0 && err.get_exit_code() != 0) std::cerr << '\n' << app.help();
        return code == 0 ? kOk : kBadInput;
    }

    try {
        if (*g) return run_moons_gen(gen);
        if (*t) return run_train(tr);
        if (*e) return run_eval(ev);
        if (*s) return run_shift_report(sh);
        if (*r) return run_reproduce(rp);
    } catch (const ConfigError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kBadInput;
    } catch (const ContractViolation& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kBadInput;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kRunFailed;
    }
    return kBadInput;
}
