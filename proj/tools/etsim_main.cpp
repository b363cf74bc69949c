// Command-line driver: compile graph specs into megakernel files, execute
// them on the simulated device, and compare the resulting reports.
//
// Exit codes: 0 success, 1 usage/validation failure, 2 simulation failure
// (deadlock, counter underflow, step-limit blowup).

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "etsim/json_io.hpp"

using namespace etsim;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << text;
}

void emit(const std::string& out_path, const std::string& text) {
    if (out_path.empty() || out_path == "-")
        std::cout << text << '\n';
    else
        write_file(out_path, text);
}

// "n=3" or "n=3,b=2"
ShapeBinding parse_binding(const std::vector<std::string>& items) {
    ShapeBinding b;
    for (const auto& item : items) {
        std::stringstream ss(item);
        std::string part;
        while (std::getline(ss, part, ',')) {
            auto eq = part.find('=');
            if (eq == std::string::npos || eq == 0)
                throw Error("binding '" + part + "' is not of the form symbol=value");
            b[part.substr(0, eq)] = std::stoll(part.substr(eq + 1));
        }
    }
    return b;
}

// Sample list: each comma-separated item is either an integer (bound to every
// symbol) or a semicolon-separated assignment list like "n=4;b=2".
std::vector<ShapeBinding> parse_samples(const std::string& text, const GraphFunction& g) {
    std::vector<ShapeBinding> out;
    if (text.empty()) {
        if (!g.symbols.empty())
            throw Error("the graph has symbols " + [&] {
                std::string s;
                for (const auto& sym : g.symbols) s += (s.empty() ? "" : ", ") + sym;
                return s;
            }() + "; pass --samples");
        out.push_back({});
        return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        ShapeBinding b;
        if (item.find('=') == std::string::npos) {
            Int v = std::stoll(item);
            for (const auto& sym : g.symbols) b[sym] = v;
        } else {
            std::stringstream is(item);
            std::string part;
            while (std::getline(is, part, ';')) {
                auto eq = part.find('=');
                if (eq == std::string::npos || eq == 0)
                    throw Error("sample '" + part + "' is not of the form symbol=value");
                b[part.substr(0, eq)] = std::stoll(part.substr(eq + 1));
            }
        }
        out.push_back(std::move(b));
    }
    return out;
}

struct SimFlags {
    int sms = -1;  // -1: take the kernel/spec default
    Int notify_cost = -1, pop_cost = -1, push_cost = -1, poll_quantum = -1, step_limit = -1;
    Int seed = 0;
    bool no_prefetch = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--sms", sms, "number of SMs (static kernels fix this at compile time)");
        cmd->add_option("--seed", seed, "duration-model and realization seed");
        cmd->add_option("--notify-cost", notify_cost, "ticks per notify");
        cmd->add_option("--pop-cost", pop_cost, "ticks per ready-queue pop");
        cmd->add_option("--push-cost", push_cost, "ticks per pushed consumer");
        cmd->add_option("--poll-quantum", poll_quantum, "blocked-wait re-check period");
        cmd->add_option("--step-limit", step_limit, "simulation event backstop");
        cmd->add_flag("--no-prefetch", no_prefetch, "charge prefetch serially before exec");
    }

    SimConfig resolve(std::optional<SimConfig> defaults) const {
        SimConfig c = defaults.value_or(SimConfig{});
        if (sms >= 0) c.num_sms = sms;
        if (notify_cost >= 0) c.notify_cost = notify_cost;
        if (pop_cost >= 0) c.pop_cost = pop_cost;
        if (push_cost >= 0) c.push_cost_per_task = push_cost;
        if (poll_quantum >= 0) c.poll_quantum = poll_quantum;
        if (step_limit >= 0) c.step_limit = step_limit;
        c.seed = seed;
        if (no_prefetch) c.enable_prefetch = false;
        return c;
    }
};

// "id=constant:5" | "id=uniform:2,11" | "id=table:1,2,3" |
// "id=skewed:base,factor,indptr_tensor,hot_group"
void apply_duration_override(GraphFunction& g, const std::string& text) {
    auto eq = text.find('=');
    auto colon = text.find(':', eq == std::string::npos ? 0 : eq);
    if (eq == std::string::npos || colon == std::string::npos)
        throw Error("duration override '" + text + "' is not of the form id=kind:args");
    std::string id = text.substr(0, eq);
    std::string kind = text.substr(eq + 1, colon - eq - 1);
    if (!g.duration_models.count(id))
        throw Error("unknown duration model '" + id + "'");
    std::vector<std::string> args;
    std::stringstream ss(text.substr(colon + 1));
    std::string part;
    while (std::getline(ss, part, ',')) args.push_back(part);
    auto num = [&](size_t i) { return std::stoll(args.at(i)); };
    if (kind == "constant" && args.size() == 1)
        g.duration_models[id] = DurationModel::constant(num(0));
    else if (kind == "uniform" && args.size() == 2)
        g.duration_models[id] = DurationModel::uniform(num(0), num(1));
    else if (kind == "table" && !args.empty()) {
        std::vector<Int> values;
        for (size_t i = 0; i < args.size(); ++i) values.push_back(num(i));
        g.duration_models[id] = DurationModel::table_of(std::move(values));
    } else if (kind == "skewed" && args.size() == 4)
        g.duration_models[id] = DurationModel::skewed(num(0), num(1), args[2], num(3));
    else
        throw Error("duration override '" + text + "' has a bad kind or argument count");
}

std::optional<RoutingRealization> resolve_realization(const std::string& routing_path,
                                                      std::optional<MoEParams> gen,
                                                      const ShapeBinding& binding, Int seed) {
    if (!routing_path.empty()) return realization_from_json(read_file(routing_path));
    if (gen) {
        MoEParams p = *gen;
        auto it = binding.find("tokens");
        if (it != binding.end()) p.tokens = it->second;
        return moe_realization(p, seed);
    }
    return std::nullopt;
}

void validate_or_die(const GraphFunction& g) {
    auto diags = validate_graph(g);
    if (diags.empty()) return;
    std::cerr << "graph validation failed:\n";
    for (const auto& d : diags) std::cerr << "  - " << d << '\n';
    std::exit(1);
}

void write_trace_file(const Trace& t, const std::string& path) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv")
        write_file(path, trace_to_csv(t));
    else
        write_file(path, trace_to_chrome_json(t));
}

void finish_run(const Trace& t, const SimConfig& cfg, const std::string& label,
                const std::string& trace_path, const std::string& out_path) {
    auto metrics = compute_metrics(t);
    if (!trace_path.empty()) write_trace_file(t, trace_path);
    std::string report = report_to_json(label, t, metrics, cfg);
    if (!out_path.empty()) write_file(out_path, report);
    std::cout << label << ": mode=" << t.mode << " makespan=" << t.makespan
              << " util=" << metrics.utilization << " spin=" << metrics.total_spin
              << " empty_polls=" << metrics.empty_polls << '\n';
}

int run_main(int argc, char** argv) {
    CLI::App app{"event-tensor megakernel compiler and device simulator"};
    app.require_subcommand(1);

    // ---- gen ------------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "emit a built-in workload as a graph spec");
    std::string gen_kind, gen_out;
    std::string gen_tiles = "8";
    int gen_fan_in = 2;
    Int gen_chunks = 4, gen_tiles_per_chunk = 4;
    MoEParams moe;
    int dag_nodes = 16, dag_edges = 24;
    Int dag_seed = 0;
    gen->add_option("workload", gen_kind, "splitk | gemm_rs | all_gather | moe | random_dag")
        ->required();
    gen->add_option("-o,--out", gen_out, "output path (default stdout)");
    gen->add_option("--mm-tiles", gen_tiles, "gemm_rs: MM tile count expression");
    gen->add_option("--fan-in", gen_fan_in, "gemm_rs: MM tiles per reduce tile");
    gen->add_option("--chunks", gen_chunks, "all_gather: ring chunks");
    gen->add_option("--tiles-per-chunk", gen_tiles_per_chunk, "all_gather: tiles per chunk");
    gen->add_option("--tokens", moe.tokens, "moe: default token count");
    gen->add_option("--experts", moe.experts, "moe: expert count");
    gen->add_option("--top-k", moe.top_k, "moe: experts per token");
    gen->add_option("--tile-size", moe.tile_size, "moe: tokens per expert tile");
    gen->add_option("--hot-fraction", moe.hot_fraction, "moe: extra load on the hot expert");
    gen->add_option("--hot-expert", moe.hot_expert, "moe: index of the hot expert");
    gen->add_option("--nodes", dag_nodes, "random_dag: node count");
    gen->add_option("--edges", dag_edges, "random_dag: edge draws");
    gen->add_option("--graph-seed", dag_seed, "random_dag: structure seed");

    // ---- compile ---------------------------------------------------------
    auto* compile = app.add_subcommand("compile", "lower a graph spec to a megakernel file");
    std::string c_spec, c_sched = "static", c_samples, c_out;
    int c_sms = 4;
    bool c_early = false;
    compile->add_option("spec", c_spec, "graph spec json")->required();
    compile->add_option("--scheduler", c_sched, "static | dynamic")
        ->check(CLI::IsMember({"static", "dynamic"}));
    compile->add_option("--samples", c_samples,
                        "static: sampled shape bindings, e.g. 1,2,4,8 or n=4;b=2,n=8;b=2");
    compile->add_option("--sms", c_sms, "static: SM count the queues are dealt over");
    compile->add_flag("--early-push", c_early, "dynamic: push consumers at producer dispatch");
    compile->add_option("-o,--out", c_out, "output path (default stdout)");

    // ---- run ---------------------------------------------------------------
    auto* run = app.add_subcommand("run", "simulate a compiled megakernel");
    std::string r_kernel, r_routing, r_trace, r_out, r_label = "run";
    std::vector<std::string> r_bind, r_durations;
    SimFlags r_flags;
    run->add_option("kernel", r_kernel, "megakernel json")->required();
    run->add_option("--bind", r_bind, "shape binding, e.g. --bind n=3 or --bind tokens=128");
    run->add_option("--duration", r_durations,
                    "override a duration model, e.g. mm=uniform:2,11 or rs=constant:3");
    run->add_option("--routing", r_routing, "routing realization json");
    run->add_option("--trace", r_trace, "write the trace (.json chrome format, .csv flat)");
    run->add_option("-o,--out", r_out, "write a run report json");
    run->add_option("--label", r_label, "label recorded in the report");
    r_flags.attach(run);

    // ---- baseline ------------------------------------------------------------
    auto* base = app.add_subcommand("baseline", "run the unfused stage-barrier reference");
    std::string b_spec, b_routing, b_trace, b_out, b_label = "barrier";
    std::vector<std::string> b_bind, b_durations;
    SimFlags b_flags;
    base->add_option("spec", b_spec, "graph spec json")->required();
    base->add_option("--bind", b_bind, "shape binding");
    base->add_option("--duration", b_durations,
                     "override a duration model, e.g. mm=uniform:2,11");
    base->add_option("--routing", b_routing, "routing realization json");
    base->add_option("--trace", b_trace, "write the trace");
    base->add_option("-o,--out", b_out, "write a run report json");
    base->add_option("--label", b_label, "label recorded in the report");
    b_flags.attach(base);

    // ---- compare -------------------------------------------------------------
    auto* cmp = app.add_subcommand("compare", "tabulate run reports against a baseline");
    std::vector<std::string> cmp_files;
    std::string cmp_baseline;
    cmp->add_option("reports", cmp_files, "report json files")->required();
    cmp->add_option("--baseline", cmp_baseline, "baseline label (default: first report)");

    // ---- inspect ------------------------------------------------------------
    auto* ins = app.add_subcommand("inspect", "summarize a compiled megakernel");
    std::string i_kernel;
    ins->add_option("kernel", i_kernel, "megakernel json")->required();

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) {
        GraphFunction g;
        std::string text;
        if (gen_kind == "splitk") {
            g = splitk_rowsum();
            text = graph_to_json(g);
        } else if (gen_kind == "gemm_rs") {
            g = gemm_reduce_scatter(gen_tiles, gen_fan_in);
            text = graph_to_json(g);
        } else if (gen_kind == "all_gather") {
            g = all_gather_gemm(gen_chunks, gen_tiles_per_chunk);
            text = graph_to_json(g);
        } else if (gen_kind == "moe") {
            g = moe_layer(moe);
            text = attach_realization_gen(graph_to_json(g), moe);
        } else if (gen_kind == "random_dag") {
            g = random_dag(dag_nodes, dag_edges, dag_seed);
            text = graph_to_json(g);
        } else {
            throw Error("unknown workload '" + gen_kind + "'");
        }
        validate_or_die(g);
        emit(gen_out, text);
        return 0;
    }

    if (compile->parsed()) {
        std::string spec_text = read_file(c_spec);
        GraphFunction g = graph_from_json(spec_text);
        validate_or_die(g);
        LoadedKernel k;
        k.realization_gen = realization_gen_from_spec(spec_text);
        k.sim_defaults = sim_config_from_spec(spec_text);
        if (c_sched == "static") {
            bool dd = false;
            for (const auto& e : g.event_tensors) dd |= e.data_dependent;
            GraphFunction lowered = dd ? worst_case_rewrite(g) : g;
            auto samples = parse_samples(c_samples, lowered);
            k.mode = "static";
            k.static_kernel = lower_static(lowered, samples, c_sms);
            k.static_kernel->rewritten = dd;
        } else {
            k.mode = "dynamic";
            k.dynamic_kernel = lower_dynamic(g, c_early);
        }
        emit(c_out, kernel_to_json(k));
        return 0;
    }

    if (run->parsed()) {
        auto k = kernel_from_json(read_file(r_kernel));
        for (const auto& d : r_durations)
            apply_duration_override(k.static_kernel ? k.static_kernel->graph
                                                    : k.dynamic_kernel->graph,
                                    d);
        auto binding = parse_binding(r_bind);
        SimConfig cfg = r_flags.resolve(k.sim_defaults);
        if (k.static_kernel && r_flags.sms < 0) cfg.num_sms = k.static_kernel->num_sms;
        auto realization = resolve_realization(
            r_routing, k.realization_gen, binding, cfg.seed);
        const RoutingRealization* rp = realization ? &*realization : nullptr;
        Trace t = k.static_kernel ? simulate(*k.static_kernel, binding, rp, cfg)
                                  : simulate(*k.dynamic_kernel, binding, rp, cfg);
        finish_run(t, cfg, r_label, r_trace, r_out);
        return 0;
    }

    if (base->parsed()) {
        std::string spec_text = read_file(b_spec);
        GraphFunction g = graph_from_json(spec_text);
        validate_or_die(g);
        for (const auto& d : b_durations) apply_duration_override(g, d);
        auto binding = parse_binding(b_bind);
        SimConfig cfg = b_flags.resolve(sim_config_from_spec(spec_text));
        auto realization = resolve_realization(
            b_routing, realization_gen_from_spec(spec_text), binding, cfg.seed);
        const RoutingRealization* rp = realization ? &*realization : nullptr;
        Trace t = simulate_barrier_baseline(g, binding, rp, cfg);
        finish_run(t, cfg, b_label, b_trace, b_out);
        return 0;
    }

    if (cmp->parsed()) {
        std::vector<LabelledRun> runs;
        for (const auto& f : cmp_files) runs.push_back(report_from_json(read_file(f)));
        std::string baseline = cmp_baseline.empty() ? runs.front().label : cmp_baseline;
        std::cout << format_comparison(runs, baseline);
        return 0;
    }

    if (ins->parsed()) {
        auto k = kernel_from_json(read_file(i_kernel));
        const GraphFunction& g = k.static_kernel ? k.static_kernel->graph : k.dynamic_kernel->graph;
        auto s = summarize_graph(g);
        std::cout << "mode: " << k.mode << '\n'
                  << "calls: " << s.num_calls << "  event tensors: " << s.num_event_tensors
                  << "  runtime tensors: " << s.num_runtime_tensors << '\n';
        std::cout << "symbols:";
        for (const auto& sym : s.symbols) std::cout << ' ' << sym;
        std::cout << '\n';
        if (k.static_kernel) {
            const auto& sk = *k.static_kernel;
            std::cout << "sms: " << sk.num_sms << "  rewritten: " << (sk.rewritten ? "yes" : "no")
                      << '\n';
            for (const auto& sample : sk.samples) {
                std::cout << "sample " << binding_to_string(sample.binding) << ": "
                          << sample.num_tasks() << " tasks, queues [";
                for (size_t i = 0; i < sample.sm_queues.size(); ++i)
                    std::cout << (i ? " " : "") << sample.sm_queues[i].size();
                if (!sample.dma_queue.empty()) std::cout << " | dma " << sample.dma_queue.size();
                std::cout << "], counters " << sample.initial_counts.size() << '\n';
            }
        } else {
            const auto& dk = *k.dynamic_kernel;
            std::cout << "early_push: " << (dk.early_push ? "yes" : "no") << '\n';
            for (const auto& t : dk.templates) {
                int armed = 0;
                for (auto w : t.wait_edges) armed += w ? 1 : 0;
                std::cout << "call " << t.call << " (" << g.calls[t.call].fn << "): "
                          << t.wait_edges.size() << " wait slots, " << armed << " armed\n";
            }
        }
        if (k.realization_gen)
            std::cout << "realization generator: mixture routing (tokens="
                      << k.realization_gen->tokens << ", experts=" << k.realization_gen->experts
                      << ")\n";
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_main(argc, argv);
    } catch (const SimError& e) {
        std::cerr << "simulation failed: " << e.what() << '\n';
        for (const auto& b : e.blocked) std::cerr << "  " << b << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
