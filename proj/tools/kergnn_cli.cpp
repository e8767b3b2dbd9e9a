#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kergnn/kergnn.hpp"

namespace fs = std::filesystem;
using namespace kergnn;

namespace {

enum Exit { ok = 0, usage = 1, data = 2, runtime = 3 };

std::string num(double x) { return model_detail::shortest(x); }

int resolve_threads(int flag) { return flag > 0 ? flag : default_threads(); }

fs::path resolve_dataset_dir(const std::string& dir, const std::string& name) {
    if (!dir.empty()) return dir;
    if (const char* env = std::getenv("KERGNN_DATA_DIR")) return fs::path(env) / name;
    return fs::path("data") / name;
}

struct TrainArgs {
    std::string dataset_dir, dataset_name, config, out = "results", splits;
    std::uint64_t seed = 0;
    int folds = 10;
    int threads = 0;
    int epochs = 0;
    bool quiet = false;
};

int run_train(const TrainArgs& a) {
    auto grid = load_config_grid(a.config);
    if (a.epochs > 0) {
        for (auto& c : grid) c.epochs = a.epochs;
    }
    const auto ds = load_tudataset(resolve_dataset_dir(a.dataset_dir, a.dataset_name), a.dataset_name);

    CVOptions opt;
    opt.folds = a.folds;
    opt.train.threads = resolve_threads(a.threads);
    if (!a.splits.empty()) opt.splits = load_split_file(a.splits, ds.size());
    const fs::path out(a.out);
    fs::create_directories(out);
    opt.on_fold = [&](const FoldResult& fr, const ModelParams& params) {
        save_checkpoint(out / ("fold" + std::to_string(fr.fold)) / "best.ckpt",
                        {params, fr.selected_config, a.seed});
        if (!a.quiet) {
            std::cerr << "fold " << fr.fold << ": test accuracy " << num(fr.test_accuracy) << " (config "
                      << fr.selected_index << ", best epoch " << fr.history.best_epoch << ")\n";
        }
    };
    const auto res = cross_validate(ds, grid, a.seed, opt);
    const auto path = out / "results.json";
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    f << cv_result_to_json(res, a.dataset_name, a.seed).dump(2) << '\n';
    if (!f) throw IoError("error while writing " + path.string());

    std::printf("%s: %zu fold(s), accuracy %.4f ± %.4f\n", a.dataset_name.c_str(), res.fold_accuracies.size(),
                res.mean, res.stddev);
    std::printf("results: %s\n", path.string().c_str());
    return ok;
}

struct KernelArgs {
    std::string graph_a, graph_b;
    int p = 2;
    std::vector<double> lambdas;
    bool oracle = false;
    bool normalize = false;
};

int run_kernel(const KernelArgs& a) {
    RWKernelConfig cfg = RWKernelConfig::uniform(a.p);
    if (!a.lambdas.empty()) cfg.lambdas = a.lambdas;
    cfg.normalize = a.normalize;
    try {
        cfg.validate();
    } catch (const ArgumentError& e) {
        throw ConfigError(e.what());
    }
    if (a.p > 5) std::cerr << "warning: P = " << a.p << " is above the usual range 1..5\n";
    const Graph ga = read_graph_file(a.graph_a);
    const Graph gb = read_graph_file(a.graph_b);
    const Subgraph sub = whole_graph(ga);
    const GraphFilter filt{gb.adjacency(), gb.attributes()};
    const double k = rw_kernel(sub, filt, cfg);
    if (!a.oracle) {
        std::printf("%s\n", num(k).c_str());
        return ok;
    }
    const double o = rw_kernel_oracle(as_weighted(ga), as_weighted(gb), cfg);
    std::printf("hadamard: %s\noracle: %s\ndifference: %s\n", num(k).c_str(), num(o).c_str(),
                num(std::abs(k - o)).c_str());
    return ok;
}

int run_wl(const std::string& ga_path, const std::string& gb_path, int iters) {
    const Graph ga = read_graph_file(ga_path);
    const Graph gb = read_graph_file(gb_path);
    if (iters <= 0) iters = static_cast<int>(std::max<Index>({ga.num_nodes(), gb.num_nodes(), 1}));
    std::printf("%s\n", to_string(wl_test(ga, gb, iters)));
    return ok;
}

int run_dataset_info(const std::string& dir, const std::string& name) {
    const auto ds = load_tudataset(resolve_dataset_dir(dir, name), name);
    const auto st = dataset_stats(ds);
    std::printf("dataset: %s\ngraphs: %zu\nclasses: %d\navg_nodes: %.2f\navg_edges: %.2f\nattr_dim: %ld\n",
                name.c_str(), st.num_graphs, st.num_classes, st.avg_nodes, st.avg_edges,
                static_cast<long>(st.attr_dim));
    return ok;
}

int run_export(const std::string& ckpt, const std::string& out_dir) {
    const auto c = load_checkpoint(ckpt);
    for (const auto& p : export_filters(c.params, out_dir)) std::printf("%s\n", p.string().c_str());
    return ok;
}

struct InitArgs {
    std::string config, out;
    long input_dim = 0;
    int classes = 2;
    std::uint64_t seed = 0;
};

int run_init(const InitArgs& a) {
    TrainConfig cfg;
    if (!a.config.empty()) {
        const auto grid = load_config_grid(a.config);
        if (grid.size() != 1) throw ConfigError("--config: init-model needs a single configuration, got a grid");
        cfg = grid.front();
    }
    cfg.validate();
    std::mt19937_64 rng(a.seed);
    const auto params = init_params(cfg.model_config(a.input_dim, a.classes), rng);
    save_checkpoint(a.out, {params, cfg, a.seed});
    std::printf("%s\n", a.out.c_str());
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"KerGNN: kernel graph neural networks for graph classification"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "kergnn 0.1.0");

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Cross-validated training with grid search");
    t->add_option("--dataset-name", train.dataset_name, "TUDataset name, e.g. MUTAG")->required();
    t->add_option("--dataset-dir", train.dataset_dir,
                  "Directory holding <name>_A.txt etc. (default $KERGNN_DATA_DIR/<name>, else data/<name>)")
        ->check(CLI::ExistingDirectory);
    t->add_option("--config", train.config, "JSON config; array-valued fields form a grid")
        ->required()
        ->check(CLI::ExistingFile);
    t->add_option("--out", train.out, "Output directory")->capture_default_str();
    t->add_option("--seed", train.seed, "Random seed")->capture_default_str();
    t->add_option("--folds", train.folds, "Outer folds; 1 = stratified 90/10 holdout")
        ->capture_default_str()
        ->check(CLI::Range(1, 1000));
    t->add_option("--splits", train.splits, "JSON file with explicit outer splits")->check(CLI::ExistingFile);
    t->add_option("--epochs", train.epochs, "Override the configured epoch count")->check(CLI::PositiveNumber);
    t->add_option("--threads", train.threads, "Worker threads (default $KERGNN_THREADS, else 1)")
        ->check(CLI::PositiveNumber);
    t->add_flag("--quiet", train.quiet, "No per-fold progress on stderr");

    KernelArgs kern;
    auto* k = app.add_subcommand("kernel", "Random walk kernel between two graph files");
    k->add_option("--graph-a", kern.graph_a, "First graph file")->required()->check(CLI::ExistingFile);
    k->add_option("--graph-b", kern.graph_b, "Second graph file")->required()->check(CLI::ExistingFile);
    k->add_option("--p", kern.p, "Maximum walk length P")->capture_default_str()->check(CLI::NonNegativeNumber);
    k->add_option("--lambdas", kern.lambdas, "P+1 comma-separated walk weights (default all 1)")->delimiter(',');
    k->add_flag("--oracle", kern.oracle, "Also evaluate on the explicit direct product graph");
    k->add_flag("--normalize", kern.normalize, "Cosine-normalize the kernel");

    std::string wl_a, wl_b;
    int wl_iters = 0;
    auto* w = app.add_subcommand("wl-test", "1-WL isomorphism test between two graph files");
    w->add_option("--graph-a", wl_a, "First graph file")->required()->check(CLI::ExistingFile);
    w->add_option("--graph-b", wl_b, "Second graph file")->required()->check(CLI::ExistingFile);
    w->add_option("--iters", wl_iters, "Max refinement rounds (default: node count)")->check(CLI::PositiveNumber);

    std::string info_dir, info_name;
    auto* d = app.add_subcommand("dataset-info", "Summary statistics of a TUDataset");
    d->add_option("--dataset-name", info_name, "TUDataset name")->required();
    d->add_option("--dataset-dir", info_dir, "Dataset directory")->check(CLI::ExistingDirectory);

    std::string ex_ckpt, ex_out;
    auto* e = app.add_subcommand("export-filters", "Write learned graph filters as DOT files");
    e->add_option("--checkpoint", ex_ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
    e->add_option("--out-dir", ex_out, "Output directory")->required();

    InitArgs init;
    auto* i = app.add_subcommand("init-model", "Write a freshly initialized model checkpoint");
    i->add_option("--input-dim", init.input_dim, "Node attribute width")->required()->check(CLI::PositiveNumber);
    i->add_option("--classes", init.classes, "Number of classes")->capture_default_str()->check(CLI::PositiveNumber);
    i->add_option("--config", init.config, "JSON config (single configuration)")->check(CLI::ExistingFile);
    i->add_option("--seed", init.seed, "Random seed")->capture_default_str();
    i->add_option("--out", init.out, "Checkpoint path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForVersion& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex);
        return usage;
    }

    try {
        if (*t) return run_train(train);
        if (*k) return run_kernel(kern);
        if (*w) return run_wl(wl_a, wl_b, wl_iters);
        if (*d) return run_dataset_info(info_dir, info_name);
        if (*e) return run_export(ex_ckpt, ex_out);
        if (*i) return run_init(init);
    } catch (const ConfigError& ex) {
        std::cerr << "config error: " << ex.what() << '\n';
        return usage;
    } catch (const LoadError& ex) {
        std::cerr << "load error: " << ex.what() << '\n';
        return data;
    } catch (const FormatError& ex) {
        std::cerr << "format error: " << ex.what() << '\n';
        return data;
    } catch (const ArgumentError& ex) {
        std::cerr << "data error: " << ex.what() << '\n';
        return data;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return runtime;
    }
    return usage;
}
