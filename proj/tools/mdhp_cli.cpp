// mdhp: dataset generation, MDHP estimation, CDF reports, classifier
// training and evaluation.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mdhp/model.hpp"
#include "mdhp/solver.hpp"
#include "mdhp/stats.hpp"
#include "mdhp/traffic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace mdhp;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kIo = 3, kNumeric = 4, kData = 5 };

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    try {
        json j = json::parse(in);
        if (!j.is_object()) throw ConfigError("config root must be an object");
        return j;
    } catch (const json::exception& e) {
        throw ConfigError("malformed config " + path + ": " + e.what());
    }
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items()) {
        if (!ok.count(k)) throw ConfigError("unknown config key " + where + "." + k);
    }
}

template <class T>
void read_key(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

// Resolved pipeline configuration: config file first, flags on top.
struct Pipeline {
    std::uint64_t master_seed = 2024;
    std::size_t workers = 1;
    traffic::DatasetConfig gen;
    SolverConfig solver;
    lstm::TrainConfig train;

    void load(const json& j) {
        check_keys(j, "config", {"master_seed", "workers", "gen", "solver", "train"});
        read_key(j, "master_seed", master_seed);
        read_key(j, "workers", workers);
        if (j.contains("gen")) {
            const json& g = j["gen"];
            check_keys(g, "gen", {"count", "dims", "scenarios", "train_fraction", "block_windows"});
            read_key(g, "count", gen.count);
            read_key(g, "dims", gen.dims);
            read_key(g, "scenarios", gen.scenarios);
            read_key(g, "train_fraction", gen.train_fraction);
            read_key(g, "block_windows", gen.block_windows);
        }
        if (j.contains("solver")) {
            const json& s = j["solver"];
            check_keys(s, "solver", {"max_epochs", "learning_rate", "optimizer", "init_alpha", "init_beta",
                                     "init_theta", "min_param", "tol_rel", "patience", "standardize_min",
                                     "standardize_max"});
            read_key(s, "max_epochs", solver.max_epochs);
            read_key(s, "learning_rate", solver.learning_rate);
            read_key(s, "init_alpha", solver.init_alpha);
            read_key(s, "init_beta", solver.init_beta);
            read_key(s, "init_theta", solver.init_theta);
            read_key(s, "min_param", solver.min_param);
            read_key(s, "tol_rel", solver.tol_rel);
            read_key(s, "patience", solver.patience);
            read_key(s, "standardize_min", solver.standardize_min);
            read_key(s, "standardize_max", solver.standardize_max);
            std::string opt;
            read_key(s, "optimizer", opt);
            if (opt == "plain-gd") solver.optimizer = OptimizerKind::plain_gd;
            else if (opt == "adaptive-moment") solver.optimizer = OptimizerKind::adaptive_moment;
            else if (!opt.empty()) throw ConfigError("solver.optimizer must be plain-gd or adaptive-moment");
        }
        if (j.contains("train")) {
            const json& t = j["train"];
            check_keys(t, "train", {"max_epoch", "learning_rate", "weight_decay", "batch_size", "hidden", "layers",
                                    "seed_base", "rank"});
            read_key(t, "max_epoch", train.max_epoch);
            read_key(t, "learning_rate", train.learning_rate);
            read_key(t, "weight_decay", train.weight_decay);
            read_key(t, "batch_size", train.batch_size);
            read_key(t, "hidden", train.hidden);
            read_key(t, "layers", train.layers);
            read_key(t, "seed_base", train.seed_base);
            read_key(t, "rank", train.rank);
        }
    }
};

struct Common {
    std::string config;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::string out;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* workers_opt = nullptr;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
    c.seed_opt = cmd->add_option("--seed", c.seed, "master seed");
    c.workers_opt = cmd->add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--out", c.out, "output path");
}

Pipeline resolve(const Common& c) {
    Pipeline p;
    p.load(load_config(c.config));
    if (c.seed_opt->count()) p.master_seed = c.seed;
    if (c.workers_opt->count()) p.workers = c.workers;
    if (p.workers < 1) throw ConfigError("workers must be >= 1");
    p.gen.master_seed = p.master_seed;
    p.gen.workers = p.workers;
    p.train.workers = p.workers;
    return p;
}

std::size_t dataset_dims(const std::string& in, std::size_t fallback) {
    const fs::path manifest = fs::is_directory(in) ? fs::path(in) / "manifest.json" : fs::path(in).parent_path() / "manifest.json";
    std::ifstream m(manifest);
    if (!m) return fallback;
    try {
        const json j = json::parse(m);
        return j.at("config").at("dims").get<std::size_t>();
    } catch (const json::exception&) {
        return fallback;
    }
}

std::vector<traffic::DatasetRecord> read_records(const std::string& in) {
    if (fs::is_directory(in)) {
        traffic::Dataset ds = traffic::read_dataset(in);
        std::vector<traffic::DatasetRecord> all = std::move(ds.train);
        for (auto& r : ds.val) all.push_back(std::move(r));
        return all;
    }
    return traffic::read_split(in);
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw IoError("failed writing " + path);
}

// ---- gen ----

int run_gen(const Common& c, const CLI::Option* count_opt, std::size_t count, const CLI::Option* scen_opt,
            const std::vector<int>& scenarios, const CLI::Option* dims_opt, std::size_t dims) {
    Pipeline p = resolve(c);
    if (count_opt->count()) p.gen.count = count;
    if (scen_opt->count()) p.gen.scenarios = scenarios;
    if (dims_opt->count()) p.gen.dims = dims;
    if (c.out.empty()) throw ConfigError("gen needs --out DIR");
    const traffic::Dataset ds = traffic::build_dataset(p.gen, c.out);
    std::cout << "ID\tTrain\tVal\tAttk Rate\tIP Ctrl\tSample\n";
    for (int id : p.gen.scenarios) {
        const auto s = traffic::scenario_row(id);
        std::size_t tr = 0, va = 0;
        for (const auto& r : ds.train) tr += r.window.scenario_id == id;
        for (const auto& r : ds.val) va += r.window.scenario_id == id;
        std::printf("%02d\t%zu\t%zu\t%s\t%s\t%s\n", id, tr, va, s.rate_name().c_str(), s.ip_name().c_str(),
                    s.sampler_name().c_str());
    }
    return kOk;
}

// ---- estimate ----

int run_estimate(const Common& c, const std::string& in, const std::string& report_path, const CLI::Option* dims_opt,
                 std::size_t dims, const CLI::Option* epochs_opt, std::size_t epochs) {
    Pipeline p = resolve(c);
    if (epochs_opt->count()) p.solver.max_epochs = epochs;
    p.solver.validate();
    if (in.empty()) throw ConfigError("estimate needs --in DATASET");
    if (!fs::exists(in)) throw IoError("dataset " + in + " does not exist");
    const std::size_t d = dims_opt->count() ? dims : dataset_dims(in, p.gen.dims);
    const auto records = read_records(in);

    std::vector<EventSequences> windows;
    windows.reserve(records.size());
    for (const auto& r : records) windows.push_back(traffic::window_events(r.window, d));
    // inside one window the kernel runs serially; windows are spread over workers
    if (p.workers > 1) p.solver.kernel = Kernel::serial;
    const BatchResult batch = batch_estimate(windows, p.solver, p.workers);

    std::vector<ParamRecord> dump;
    std::size_t failed = 0;
    for (std::size_t k = 0; k < records.size(); ++k) {
        const auto& o = batch.outcomes[k];
        if (!o.result) {
            std::cerr << "window " << records[k].window_id << ": " << o.error << '\n';
            ++failed;
            continue;
        }
        ParamRecord rec = ParamRecord::from_result(records[k].window_id, *o.result);
        rec.label = traffic::to_string(records[k].window.label);
        rec.split = records[k].split;
        rec.scenario_id = records[k].window.scenario_id;
        dump.push_back(std::move(rec));
    }
    const std::string dump_path = c.out.empty() ? "params.jsonl" : c.out;
    write_param_dump(dump_path, dump);

    std::string report = ThroughputReport::header() + "\n";
    if (batch.report.windows > 0) report += batch.report.row() + "\n";
    write_text(report_path.empty() ? dump_path + ".report.tsv" : report_path, report);
    std::cout << report;
    if (failed) std::cerr << failed << " window(s) failed\n";
    return kOk;
}

// ---- report-cdf ----

int run_report_cdf(const Common& c, const std::string& dump_path, const std::string& pair) {
    if (dump_path.empty()) throw ConfigError("report-cdf needs --dump FILE");
    const auto records = read_param_dump(dump_path);
    if (records.empty()) throw DataError("parameter dump is empty");
    const std::size_t d = records.front().dims;

    bool pooled = pair.empty();
    std::size_t pi = 0, pj = 0;
    if (!pooled) {
        char sep = 0;
        std::istringstream is(pair);
        if (!(is >> pi >> sep >> pj) || (sep != ',' && sep != '-') || pi >= d || pj >= d) {
            throw ConfigError("--pair must be I,J with indices below " + std::to_string(d));
        }
    }

    std::map<std::string, std::map<std::string, std::vector<double>>> values;  // param -> label -> values
    for (const auto& r : records) {
        if (r.dims != d) throw DataError("parameter dump mixes dimensions");
        if (r.label.empty()) throw DataError("record " + r.window_id + " carries no label");
        auto& a = values["alpha"][r.label];
        auto& b = values["beta"][r.label];
        auto& t = values["theta"][r.label];
        if (pooled) {
            a.insert(a.end(), r.alpha.begin(), r.alpha.end());
            b.insert(b.end(), r.beta.begin(), r.beta.end());
            t.insert(t.end(), r.theta.begin(), r.theta.end());
        } else {
            a.push_back(r.alpha[pi * d + pj]);
            b.push_back(r.beta[pi * d + pj]);
            t.push_back(r.theta[pi]);
        }
    }
    if (values["alpha"].size() != 2 || !values["alpha"].count("normal") || !values["alpha"].count("attack")) {
        throw DataError("report-cdf needs both normal and attack records");
    }

    std::ostringstream table;
    table << "param\tlabel\tvalue\tcdf\n";
    table.precision(10);
    std::ostringstream ks;
    ks << "param\tks\tp_value\n";
    for (const char* name : {"alpha", "beta", "theta"}) {
        for (const char* label : {"normal", "attack"}) {
            for (const auto& pt : stats::ecdf(values[name][label])) {
                table << name << '\t' << label << '\t' << pt.value << '\t' << pt.cumulative << '\n';
            }
        }
        const auto r = stats::ks_two_sample_test(values[name]["normal"], values[name]["attack"]);
        char buf[96];
        std::snprintf(buf, sizeof buf, "%s\t%.6f\t%.6g\n", name, r.statistic, r.p_value);
        ks << buf;
    }
    write_text(c.out.empty() ? dump_path + ".cdf.tsv" : c.out, table.str());
    std::cout << ks.str();
    return kOk;
}

// ---- train / eval ----

struct SampleSets {
    std::vector<lstm::Sample> train;
    std::vector<lstm::Sample> val;
};

SampleSets load_samples(const std::string& in, const std::string& dump_path) {
    if (in.empty()) throw ConfigError("--in DATASET is required");
    if (dump_path.empty()) throw ConfigError("--dump FILE is required");
    if (!fs::exists(in)) throw IoError("dataset " + in + " does not exist");
    const auto records = read_records(in);
    const auto params = read_param_dump(dump_path);
    std::map<std::string, const ParamRecord*> by_id;
    for (const auto& p : params) by_id[p.window_id] = &p;
    SampleSets out;
    std::size_t missing = 0;
    for (const auto& r : records) {
        const auto it = by_id.find(r.window_id);
        if (it == by_id.end()) {
            ++missing;
            continue;
        }
        const lstm::HawkesFeatures hf = lstm::HawkesFeatures::from_params(it->second->params(), it->second->t_span);
        (r.split == "train" ? out.train : out.val).push_back(lstm::make_sample(r.window, hf, r.window_id));
    }
    if (missing) std::cerr << missing << " window(s) have no estimated parameters and are skipped\n";
    return out;
}

int run_train(const Common& c, const std::string& in, const std::string& dump_path, const std::string& checkpoint,
              const std::string& trace_path, const CLI::Option* epochs_opt, std::size_t epochs) {
    Pipeline p = resolve(c);
    if (c.seed_opt->count()) p.train.seed_base = c.seed;
    if (epochs_opt->count()) p.train.max_epoch = epochs;
    p.train.validate();
    const std::string ckpt = !checkpoint.empty() ? checkpoint : (!c.out.empty() ? c.out : "model.bin");
    const SampleSets sets = load_samples(in, dump_path);
    if (sets.train.empty()) throw DataError("no training windows");
    const lstm::TrainResult res = lstm::train(sets.train, sets.val, p.train);
    lstm::Model model = res.model;
    lstm::save_checkpoint(ckpt, model, p.train);

    std::string trace = lstm::trace_header() + "\n";
    for (const auto& e : res.trace) trace += lstm::trace_row(e) + "\n";
    write_text(trace_path.empty() ? ckpt + ".trace.tsv" : trace_path, trace);
    std::cout << trace;
    return kOk;
}

int run_eval(const Common& c, const std::string& in, const std::string& dump_path, const std::string& checkpoint,
             const std::string& split) {
    Pipeline p = resolve(c);
    if (checkpoint.empty()) throw ConfigError("eval needs --checkpoint PATH");
    if (!fs::exists(checkpoint)) throw IoError("checkpoint " + checkpoint + " does not exist");
    const lstm::Model model = lstm::load_checkpoint(checkpoint);
    SampleSets sets = load_samples(in, dump_path);
    std::vector<lstm::Sample> samples;
    if (split == "train" || split == "all") samples = sets.train;
    if (split == "val" || split == "all") samples.insert(samples.end(), sets.val.begin(), sets.val.end());
    const lstm::Metrics m = lstm::evaluate(model, samples, p.workers);

    ordered_json j;
    j["split"] = split;
    j["windows"] = samples.size();
    j["accuracy"] = m.accuracy;
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    j["f1"] = m.f1;
    j["auc"] = m.auc;
    j["loss"] = m.loss;
    j["confusion"] = {{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}};
    ordered_json roc = ordered_json::array();
    for (const auto& pt : m.roc) roc.push_back({pt.fpr, pt.tpr});
    j["roc"] = std::move(roc);
    write_text(c.out.empty() ? "-" : c.out, j.dump(2) + "\n");
    std::printf("accuracy\t%.6f\nprecision\t%.6f\nrecall\t%.6f\nf1\t%.6f\nauc\t%.6f\n", m.accuracy, m.precision,
                m.recall, m.f1, m.auc);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MDHP estimation, attack-traffic generation and detection"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    Common gen_c, est_c, cdf_c, train_c, eval_c;

    auto* gen = app.add_subcommand("gen", "generate the labeled scenario dataset");
    add_common(gen, gen_c);
    std::size_t count = 100, dims = 6;
    std::vector<int> scenarios;
    auto* count_opt = gen->add_option("--count", count, "windows per scenario")->check(CLI::PositiveNumber);
    auto* scen_opt = gen->add_option("--scenario", scenarios, "scenario id(s), 0..8")->check(CLI::Range(0, 8));
    auto* dims_opt = gen->add_option("--dims", dims, "ECU count")->check(CLI::Range(2, 1000));

    auto* est = app.add_subcommand("estimate", "estimate MDHP parameters per window");
    add_common(est, est_c);
    std::string est_in, est_report;
    std::size_t est_dims = 6, est_epochs = 300;
    est->add_option("--in", est_in, "dataset directory or .jsonl split");
    est->add_option("--report", est_report, "throughput report path");
    auto* est_dims_opt = est->add_option("--dims", est_dims, "ECU count (default: from manifest)");
    auto* est_epochs_opt = est->add_option("--epochs", est_epochs, "solver epochs")->check(CLI::PositiveNumber);

    auto* cdf = app.add_subcommand("report-cdf", "empirical CDFs of estimated parameters by label");
    add_common(cdf, cdf_c);
    std::string cdf_dump, cdf_pair;
    cdf->add_option("--dump", cdf_dump, "parameter dump")->required();
    cdf->add_option("--pair", cdf_pair, "dimension pair I,J (default: all entries pooled)");

    auto* tr = app.add_subcommand("train", "train the MDHP-LSTM classifier");
    add_common(tr, train_c);
    std::string tr_in, tr_dump, tr_ckpt, tr_trace;
    std::size_t tr_epochs = 50;
    tr->add_option("--in", tr_in, "dataset directory");
    tr->add_option("--dump", tr_dump, "parameter dump from estimate");
    tr->add_option("--checkpoint", tr_ckpt, "checkpoint path");
    tr->add_option("--trace", tr_trace, "per-epoch trace path");
    auto* tr_epochs_opt = tr->add_option("--epochs", tr_epochs, "max epochs")->check(CLI::PositiveNumber);

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(ev, eval_c);
    std::string ev_in, ev_dump, ev_ckpt, ev_split = "val";
    ev->add_option("--in", ev_in, "dataset directory");
    ev->add_option("--dump", ev_dump, "parameter dump from estimate");
    ev->add_option("--checkpoint", ev_ckpt, "checkpoint path");
    ev->add_option("--split", ev_split, "train | val | all")->check(CLI::IsMember({"train", "val", "all"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (gen->parsed()) return run_gen(gen_c, count_opt, count, scen_opt, scenarios, dims_opt, dims);
        if (est->parsed()) return run_estimate(est_c, est_in, est_report, est_dims_opt, est_dims, est_epochs_opt, est_epochs);
        if (cdf->parsed()) return run_report_cdf(cdf_c, cdf_dump, cdf_pair);
        if (tr->parsed()) return run_train(train_c, tr_in, tr_dump, tr_ckpt, tr_trace, tr_epochs_opt, tr_epochs);
        if (ev->parsed()) return run_eval(eval_c, ev_in, ev_dump, ev_ckpt, ev_split);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kIo;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kNumeric;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kIo;
    }
    return kOk;
}
