// SPDX-License-Identifier: Apache-2.0
// fbsd: generate traces, train detectors, evaluate and stream verdicts.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fbsd/core.hpp"
#include "fbsd/featurize.hpp"
#include "fbsd/pipeline.hpp"
#include "fbsd/signatures.hpp"
#include "fbsd/simulator.hpp"

namespace fs = std::filesystem;
using namespace fbsd;
using nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kOther = 1, kValidation = 2, kIo = 3, kSchema = 4 };

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::Io: return kIo;
        case ErrorKind::Parse:
        case ErrorKind::SchemaMismatch:
        case ErrorKind::MsaLabelInFbsDataset:
        case ErrorKind::LabelSpaceMismatch:
        case ErrorKind::ShapeMismatch:
        case ErrorKind::UntrainedModel: return kSchema;
        case ErrorKind::Validation:
        case ErrorKind::NotAnAttackTrace:
        case ErrorKind::UnregisteredAttack:
        case ErrorKind::ClassTooSmall:
        case ErrorKind::EmptyTrainingSet:
        case ErrorKind::EmptyInput:
        case ErrorKind::MissingClass:
        case ErrorKind::UnknownAttack:
        case ErrorKind::LengthMismatch:
        case ErrorKind::AllMasked: return kValidation;
    }
    return kOther;
}

void write_text(const std::string& path, const std::string& text) {
    if (auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
}

std::vector<Layer> parse_layers(const std::string& text) {
    if (text == "both") return {Layer::Nas, Layer::Rrc};
    return {parse_layer(text)};
}

std::pair<std::size_t, std::size_t> parse_range(const std::string& text) {
    auto colon = text.find(':');
    if (colon == std::string::npos) throw Error(ErrorKind::Validation, "range must be A:B");
    try {
        std::size_t a = std::stoul(text.substr(0, colon)), b = std::stoul(text.substr(colon + 1));
        if (a == 0 || b < a) throw Error(ErrorKind::Validation, "range needs 0 < A <= B");
        return {a, b};
    } catch (const std::logic_error&) {
        throw Error(ErrorKind::Validation, "range must be A:B with integers");
    }
}

// Whole file, or the train/test side of a seeded split.
std::vector<Trace> load_data(const std::string& path, double split_ratio, std::uint64_t seed, bool train_side) {
    auto traces = read_traces_file(path);
    if (split_ratio <= 0.0) return traces;
    auto sp = feat::split(traces, split_ratio, seed);
    return train_side ? sp.train : sp.test;
}

void print_metrics(const std::string& title, const MetricsReport& m) {
    std::printf("%-14s n=%-6zu acc=%.4f macroP=%.4f macroR=%.4f macroF1=%.4f fpr=%.4f\n", title.c_str(), m.n,
                m.accuracy, m.macro_precision, m.macro_recall, m.macro_f1, m.fpr);
}

struct GenArgs {
    std::string config, preset, scenario = "benign", out, manifest;
    int attack = 0, level = 0, traces = 10, workers = 1;
    bool mobility = false;
    double noise = 0.0;
    std::uint64_t seed = 1;
};

int cmd_gen(const GenArgs& a, const CLI::App& app) {
    std::vector<sim::ScenarioSpec> specs;
    const bool seed_given = app.count("--seed") > 0;
    if (!a.config.empty()) {
        specs = sim::parse_config_file(a.config);
        if (seed_given)
            for (auto& s : specs) s.master_seed = a.seed;
    } else if (a.preset == "fbs-desk") {
        specs = pipeline::fbs_desk_specs(a.seed);
    } else if (a.preset == "msa-desk") {
        specs = pipeline::msa_desk_specs(a.seed, app.count("--traces") ? a.traces : 5,
                                         app.count("--noise") ? a.noise : 0.3);
    } else if (!a.preset.empty()) {
        throw Error(ErrorKind::Validation, "unknown preset '" + a.preset + "'");
    } else {
        sim::ScenarioSpec s;
        if (a.scenario == "benign") s.scenario = Label::benign();
        else if (a.scenario == "fbs") s.scenario = Label::fbs();
        else if (a.scenario == "msa") s.scenario = Label::msa(a.attack);
        else throw Error(ErrorKind::Validation, "unknown scenario '" + a.scenario + "'");
        s.attacker_level = a.level;
        s.mobility = a.mobility;
        s.n_traces = a.traces;
        s.master_seed = a.seed;
        s.noise = a.noise;
        specs.push_back(s);
    }
    auto ds = sim::gen_dataset(specs, a.workers);
    write_traces_file(a.out, ds.traces);
    write_text(a.manifest.empty() ? a.out + ".manifest.json" : a.manifest, sim::manifest_to_json(ds.manifest));
    std::fprintf(stderr, "wrote %d traces to %s\n", ds.manifest.total, a.out.c_str());
    return kOk;
}

struct FeaturizeArgs {
    std::string data, layer = "nas", task = "fbs", codebook, codebook_out, out;
};

int cmd_featurize(const FeaturizeArgs& a) {
    auto traces = read_traces_file(a.data);
    const Layer layer = parse_layer(a.layer);
    feat::Codebook existing;
    if (!a.codebook.empty()) existing = feat::Codebook::load(a.codebook);
    auto [m, cb] = feat::encode(traces, layer, pipeline::parse_task(a.task), a.codebook.empty() ? nullptr : &existing);
    std::ofstream out(a.out);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + a.out);
    feat::write_csv(out, m);
    if (!a.codebook_out.empty()) cb.save(a.codebook_out);
    std::fprintf(stderr, "%zu rows x %zu columns\n", m.rows(), m.width);
    return kOk;
}

struct TrainArgs {
    std::string target, data, model, layer = "both";
    std::size_t len_seq = 0, stride = 0, hidden = 64;
    int epochs = 0;
    double lr = 0.0, clip = -1.0, split = 0.0;
    std::uint64_t seed = 1;
};

int cmd_train(const TrainArgs& a) {
    auto train = load_data(a.data, a.split, a.seed, true);
    const auto layers = parse_layers(a.layer);
    pipeline::Models models;
    const bool fbs_target = a.target != "msa";
    if (fs::exists(fs::path(a.model) / "models.json")) {
        models = pipeline::Models::load(a.model);
        if (models.task != (fbs_target ? DatasetKind::Fbs : DatasetKind::Msa)) models = {};
    }
    models.task = fbs_target ? DatasetKind::Fbs : DatasetKind::Msa;

    for (Layer l : layers) {
        if (a.target == "fbs-packet" || a.target == "fbs") {
            auto cfg = fbs::default_packet_config(l);
            cfg.hidden = a.hidden;
            cfg.len_seq = a.len_seq;
            cfg.stride = a.stride;
            cfg.seed = a.seed;
            if (a.epochs > 0) cfg.epochs = a.epochs;
            if (a.lr > 0) cfg.lr = a.lr;
            if (a.clip >= 0) cfg.clip_norm = a.clip;
            auto res = pipeline::train_fbs_packet(train, l, cfg);
            std::fprintf(stderr, "%s packet model: loss %.5f -> %.5f over %zu epochs\n",
                         std::string(to_string(l)).c_str(), res.loss_history.front(), res.loss_history.back(),
                         res.loss_history.size());
            models.fbs[l] = std::move(res.models);
        }
        if (a.target == "fbs-trace" || a.target == "fbs") {
            auto it = models.fbs.find(l);
            if (it == models.fbs.end())
                throw Error(ErrorKind::Validation, "no " + std::string(to_string(l)) + " packet model in " + a.model);
            it->second.trace = pipeline::train_fbs_trace(it->second, train);
            std::fprintf(stderr, "%s trace model fitted\n", std::string(to_string(l)).c_str());
        }
        if (a.target == "msa") {
            msa::SageConfig cfg;
            cfg.hidden = a.hidden;
            cfg.seed = a.seed;
            if (a.epochs > 0) cfg.epochs = a.epochs;
            if (a.lr > 0) cfg.lr = a.lr;
            auto res = pipeline::train_msa_layer(train, l, cfg);
            std::fprintf(stderr, "%s graph model: loss %.5f -> %.5f over %zu epochs\n",
                         std::string(to_string(l)).c_str(), res.loss_history.front(), res.loss_history.back(),
                         res.loss_history.size());
            models.msa[l] = {std::move(res.model), std::move(res.bank)};
        }
    }
    models.save(a.model);
    return kOk;
}

struct DetectArgs {
    std::string model, data, report, verdicts, layer = "nas";
    bool fuse = true;
    double tau = 0.5, split = 0.0;
    int workers = 1;
    std::uint64_t seed = 1;

    pipeline::DetectOptions options() const { return {fuse, parse_layer(layer), tau}; }
};

int cmd_eval(const DetectArgs& a) {
    auto models = pipeline::Models::load(a.model);
    auto traces = load_data(a.data, a.split, a.seed, false);
    auto r = pipeline::evaluate(models, traces, a.options(), a.workers);
    if (!a.report.empty()) write_text(a.report, r.report_json());
    if (!a.verdicts.empty()) {
        std::ofstream out(a.verdicts);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + a.verdicts);
        for (const auto& v : r.verdicts) out << v.to_json() << '\n';
    }
    print_metrics("trace", r.trace_metrics);
    for (const auto& [l, m] : r.layer_metrics) print_metrics(std::string(to_string(l)) + " trace", m);
    for (const auto& [l, m] : r.packet_metrics) print_metrics(std::string(to_string(l)) + " packet", m);
    for (const auto& [l, e] : r.edge_scores)
        std::printf("%-14s macro edge accuracy=%.4f\n", (std::string(to_string(l)) + " edge").c_str(),
                    e.macro_accuracy);
    return kOk;
}

int cmd_detect(const DetectArgs& a) {
    auto models = pipeline::Models::load(a.model);
    const auto opts = a.options();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(std::cin, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Trace t;
        try {
            t = trace_from_json(line);
        } catch (const Error& e) {
            std::string msg = e.what();
            if (auto p = msg.find(": "); p != std::string::npos) msg = msg.substr(p + 2);
            throw Error(e.kind(), "line " + std::to_string(lineno) + ": " + msg);
        }
        std::cout << pipeline::detect(models, t, opts).to_json() << '\n' << std::flush;
    }
    return kOk;
}

int cmd_gradcheck(std::uint64_t seed, int seeds, const std::string& report) {
    std::map<std::string, pipeline::GradCheckRow> worst;
    std::vector<std::string> order;
    for (int s = 0; s < seeds; ++s)
        for (const auto& r : pipeline::gradcheck_suite(seed + static_cast<std::uint64_t>(s))) {
            auto [it, fresh] = worst.try_emplace(r.component, r);
            if (fresh) order.push_back(r.component);
            else if (r.max_rel_error > it->second.max_rel_error) it->second = r;
        }
    bool ok = true;
    ordered_json j;
    j["format_version"] = 1;
    j["seeds"] = seeds;
    auto rows = ordered_json::array();
    for (const auto& name : order) {
        const auto& r = worst.at(name);
        ok = ok && r.passed();
        std::printf("%-22s max_rel_error=%.3e tol=%.0e %s\n", name.c_str(), r.max_rel_error, r.tolerance,
                    r.passed() ? "ok" : "FAIL");
        rows.push_back({{"component", name}, {"max_rel_error", r.max_rel_error}, {"tolerance", r.tolerance},
                        {"passed", r.passed()}});
    }
    j["components"] = std::move(rows);
    if (!report.empty()) write_text(report, j.dump(2));
    return ok ? kOk : kOther;
}

struct SweepArgs {
    std::string data, layer = "nas", range = "9:15", report;
    int epochs = 0;
    double split = 0.8;
    std::uint64_t seed = 1;
};

int cmd_seqlen_sweep(const SweepArgs& a) {
    const Layer layer = parse_layer(a.layer);
    auto [lo, hi] = parse_range(a.range);
    auto sp = feat::split(read_traces_file(a.data), a.split, a.seed);
    ordered_json j;
    j["format_version"] = 1;
    j["layer"] = to_string(layer);
    auto rows = ordered_json::array();
    for (std::size_t L = lo; L <= hi; ++L) {
        auto cfg = fbs::default_packet_config(layer);
        cfg.len_seq = L;
        cfg.seed = a.seed;
        if (a.epochs > 0) cfg.epochs = a.epochs;
        auto res = pipeline::train_fbs_packet(sp.train, layer, cfg);
        auto [m, cb] = feat::encode(sp.test, layer, DatasetKind::Fbs, &res.models.codebook);
        std::vector<int> pred;
        for (std::size_t t = 0; t < m.traces.size(); ++t)
            for (double p : fbs::predict_packets(res.models.packet, m, t)) pred.push_back(p >= 0.5 ? 1 : 0);
        auto metrics = compute_metrics(pred, m.labels, DatasetKind::Fbs);
        print_metrics("len_seq " + std::to_string(L), metrics);
        rows.push_back({{"len_seq", L}, {"packet_accuracy", metrics.accuracy}, {"macro_f1", metrics.macro_f1},
                        {"fpr", metrics.fpr}, {"final_loss", res.loss_history.back()}});
    }
    j["rows"] = std::move(rows);
    if (!a.report.empty()) write_text(a.report, j.dump(2));
    return kOk;
}

struct CompareArgs {
    std::string signatures, model, report, emit;
    int traces = 50;
    double noise = 0.3;
    std::uint64_t seed = 1;
};

int cmd_compare_signatures(const CompareArgs& a) {
    if (!a.emit.empty()) {
        write_text(a.emit, sig::builtin_signatures_json());
        return kOk;
    }
    sig::SignatureSet custom;
    if (!a.signatures.empty()) {
        std::ifstream in(a.signatures);
        if (!in) throw Error(ErrorKind::Io, "cannot open " + a.signatures);
        std::stringstream ss;
        ss << in.rdbuf();
        custom = sig::parse_signatures(ss.str());
    }
    const sig::SignatureSet& set = a.signatures.empty() ? sig::builtin_signatures() : custom;
    std::vector<Trace> original, reshaped;
    for (int attack : set.attacks()) {
        sim::ScenarioSpec s{Label::msa(attack), 3, false, a.traces, a.seed, a.noise};
        auto o = sim::gen_dataset(std::vector{s});
        s.attacker_level = 4;
        auto r = sim::gen_dataset(std::vector{s});
        original.insert(original.end(), o.traces.begin(), o.traces.end());
        reshaped.insert(reshaped.end(), r.traces.begin(), r.traces.end());
    }
    std::function<Label(const Trace&)> graph;
    pipeline::Models models;
    if (!a.model.empty()) {
        models = pipeline::Models::load(a.model);
        if (models.task != DatasetKind::Msa) throw Error(ErrorKind::SchemaMismatch, "--model must hold msa models");
        graph = [&](const Trace& t) { return pipeline::detect(models, t, {}).label; };
    }
    auto rows = sig::evasion_report(set, original, reshaped, graph);
    std::printf("%-7s %-6s %-22s %-22s %s\n", "attack", "traces", "original dfa/mm/pltl", "reshaped dfa/mm/pltl",
                "graph");
    for (const auto& r : rows) {
        auto cell = [](const std::map<sig::Representation, double>& m) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.2f/%.2f/%.2f", m.at(sig::Representation::Dfa),
                          m.at(sig::Representation::Mealy), m.at(sig::Representation::Pltl));
            return std::string(buf);
        };
        std::printf("%-7d %-6zu %-22s %-22s", r.attack, r.traces, cell(r.original).c_str(), cell(r.reshaped).c_str());
        if (r.graph_recovery >= 0) std::printf(" %.2f", r.graph_recovery);
        std::printf("\n");
    }
    if (!a.report.empty()) write_text(a.report, sig::evasion_report_json(rows));
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fake base station and multi-step attack detection over NAS/RRC traces"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* g = app.add_subcommand("gen", "Generate labeled traces");
    g->add_option("--config", gen.config, "Scenario config file");
    g->add_option("--preset", gen.preset, "fbs-desk or msa-desk");
    g->add_option("--scenario", gen.scenario, "benign, fbs or msa");
    g->add_option("--attack", gen.attack, "Attack id for msa");
    g->add_option("--level", gen.level, "Attacker level 0-4");
    g->add_option("--traces", gen.traces, "Trace count");
    g->add_flag("--mobility", gen.mobility, "Enable mobility episodes");
    g->add_option("--noise", gen.noise, "Benign variability in [0,1]");
    g->add_option("--seed", gen.seed, "Master seed");
    g->add_option("--workers", gen.workers, "Generator threads");
    g->add_option("--out", gen.out, "Trace JSONL output")->required();
    g->add_option("--manifest", gen.manifest, "Manifest JSON output");

    FeaturizeArgs fz;
    auto* f = app.add_subcommand("featurize", "Encode traces into a feature matrix");
    f->add_option("--data", fz.data)->required();
    f->add_option("--layer", fz.layer, "nas or rrc");
    f->add_option("--task", fz.task, "fbs or msa label space");
    f->add_option("--codebook", fz.codebook, "Existing codebook");
    f->add_option("--codebook-out", fz.codebook_out, "Write the codebook");
    f->add_option("--out", fz.out, "CSV output")->required();

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train detectors into a model directory");
    t->add_option("target", tr.target, "fbs-packet, fbs-trace, fbs or msa")
        ->required()
        ->check(CLI::IsMember({"fbs-packet", "fbs-trace", "fbs", "msa"}));
    t->add_option("--data", tr.data)->required();
    t->add_option("--model", tr.model, "Model directory")->required();
    t->add_option("--layer", tr.layer, "nas, rrc or both");
    t->add_option("--len-seq", tr.len_seq, "Window length (0: layer default)");
    t->add_option("--stride", tr.stride, "Window stride (0: len-seq)");
    t->add_option("--epochs", tr.epochs, "Epochs (0: default)");
    t->add_option("--lr", tr.lr, "Learning rate (0: default)");
    t->add_option("--clip", tr.clip, "Gradient norm clip (negative: default)");
    t->add_option("--hidden", tr.hidden, "Hidden units");
    t->add_option("--split", tr.split, "Train on the train side of a seeded split with this ratio");
    t->add_option("--seed", tr.seed);

    DetectArgs ev;
    auto* e = app.add_subcommand("eval", "Evaluate models on a labeled trace file");
    e->add_option("--model,--models", ev.model, "Model directory")->required();
    e->add_option("--data", ev.data)->required();
    e->add_option("--report", ev.report, "Metrics JSON output");
    e->add_option("--verdicts", ev.verdicts, "Verdict JSONL output");
    e->add_flag("--fuse,!--no-fuse", ev.fuse, "Fuse NAS and RRC verdicts");
    e->add_option("--layer", ev.layer, "Verdict layer without fusion");
    e->add_option("--tau", ev.tau, "Overlap threshold for variants");
    e->add_option("--split", ev.split, "Evaluate the test side of a seeded split with this ratio");
    e->add_option("--seed", ev.seed);
    e->add_option("--workers", ev.workers);

    DetectArgs dt;
    auto* d = app.add_subcommand("detect", "Stream trace JSONL from stdin to verdict JSONL on stdout");
    d->add_option("--model,--models", dt.model, "Model directory")->required();
    d->add_flag("--fuse,!--no-fuse", dt.fuse, "Fuse NAS and RRC verdicts");
    d->add_option("--layer", dt.layer, "Verdict layer without fusion");
    d->add_option("--tau", dt.tau, "Overlap threshold for variants");

    std::uint64_t gc_seed = 1;
    int gc_seeds = 20;
    std::string gc_report;
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
    gc->add_option("--seed", gc_seed);
    gc->add_option("--seeds", gc_seeds, "Number of seeds");
    gc->add_option("--report", gc_report);

    SweepArgs sw;
    auto* s = app.add_subcommand("seqlen-sweep", "Packet accuracy over a range of window lengths");
    s->add_option("--data", sw.data)->required();
    s->add_option("--layer", sw.layer);
    s->add_option("--range", sw.range, "A:B");
    s->add_option("--epochs", sw.epochs);
    s->add_option("--split", sw.split);
    s->add_option("--seed", sw.seed);
    s->add_option("--report", sw.report);

    CompareArgs cs;
    auto* c = app.add_subcommand("compare-signatures", "Signature baselines on original and reshaped attacks");
    c->add_option("--signatures", cs.signatures, "Signature JSON (default: built-in)");
    c->add_option("--model,--models", cs.model, "MSA model directory for graph recovery");
    c->add_option("--traces", cs.traces, "Traces per attack");
    c->add_option("--noise", cs.noise);
    c->add_option("--seed", cs.seed);
    c->add_option("--report", cs.report);
    c->add_option("--emit-builtin", cs.emit, "Write the built-in signature JSON and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        int rc = app.exit(err);
        return rc == 0 ? kOk : kValidation;
    }

    try {
        if (*g) return cmd_gen(gen, *g);
        if (*f) return cmd_featurize(fz);
        if (*t) return cmd_train(tr);
        if (*e) return cmd_eval(ev);
        if (*d) return cmd_detect(dt);
        if (*gc) return cmd_gradcheck(gc_seed, gc_seeds, gc_report);
        if (*s) return cmd_seqlen_sweep(sw);
        if (*c) return cmd_compare_signatures(cs);
    } catch (const Error& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return exit_code(err.kind());
    } catch (const std::exception& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return kOther;
    }
    return kOther;
}
