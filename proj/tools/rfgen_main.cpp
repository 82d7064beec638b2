// rfgen command-line driver: dataset generation, training, candidate
// generation, ranking, vectorization, and evaluation.

#include <CLI11.hpp>

#include "rfgen/cli.hpp"

#include <ctime>
#include <exception>
#include <iostream>

namespace {

std::string now_string() {
    std::time_t t = std::time(nullptr);
    char buf[64];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace rfgen;
    using namespace rfgen::cli;

    CLI::App app{"generative inverse design of RF PCB passives"};
    app.require_subcommand(1);

    DatasetGenOptions dg;
    std::string augment_tok = "on";
    auto* c_dg = app.add_subcommand("dataset-gen", "generate a solver-labeled layout dataset");
    c_dg->add_option("--families", dg.families, "family tokens")->delimiter(',');
    c_dg->add_option("--count", dg.count, "record count");
    c_dg->add_option("--seed", dg.seed, "global seed");
    c_dg->add_option("--augment", augment_tok, "on|off")->check(CLI::IsMember({"on", "off"}));
    c_dg->add_option("--out", dg.out, "output directory")->required();
    c_dg->add_flag("--no-timestamp", "omit the manifest timestamp");

    TrainCliOptions tr;
    auto* c_tr = app.add_subcommand("train", "train the toy denoiser");
    c_tr->add_option("--dataset", tr.dataset, "dataset directory")->required();
    c_tr->add_option("--steps", tr.steps, "training steps");
    c_tr->add_option("--batch", tr.batch, "batch size");
    c_tr->add_option("--seed", tr.seed, "training seed");
    c_tr->add_option("--out", tr.out, "model output path");

    GenerateOptions gen;
    auto* c_gen = app.add_subcommand("generate", "sample candidate layouts");
    c_gen->add_option("--model", gen.model, "model file")->required();
    c_gen->add_option("--target", gen.target, "target .s2p (optional)");
    c_gen->add_option("--ports", gen.ports, "port coordinates x0,y0;x1,y1");
    c_gen->add_option("--substrate", gen.substrate, "ro4003c | fr4 | custom:eps,tand,h");
    c_gen->add_option("--template", gen.template_name, "family token or none");
    c_gen->add_option("--sampler", gen.sampler, "dpmpp | langevin");
    c_gen->add_option("--candidates", gen.candidates, "candidate count (0 = sampler default)");
    c_gen->add_option("--seed", gen.seed, "sampling seed");
    c_gen->add_option("--out", gen.out, "output directory");
    c_gen->add_option("--workers", gen.workers, "worker threads");

    RankOptions rk;
    auto* c_rk = app.add_subcommand("rank", "rank candidate boards against a target");
    c_rk->add_option("--candidates", rk.candidates_dir, "candidate directory")->required();
    c_rk->add_option("--target", rk.target, "target .s2p")->required();
    c_rk->add_option("--template", rk.template_name, "family token")->required();
    c_rk->add_option("--ports", rk.ports, "port coordinates");
    c_rk->add_option("--substrate", rk.substrate, "substrate spec");
    c_rk->add_option("--out-csv", rk.out_csv, "CSV report path");

    VectorizeOptions vec;
    auto* c_vec = app.add_subcommand("vectorize", "export a board to Gerber/Excellon");
    c_vec->add_option("--board", vec.board, "raw f32 board file")->required();
    c_vec->add_option("--out-gerber", vec.out_gerber, "Gerber output");
    c_vec->add_option("--out-drill", vec.out_drill, "Excellon output");

    EvalOptions ev;
    auto* c_ev = app.add_subcommand("eval", "evaluate the generator on held-out targets");
    c_ev->add_option("--dataset", ev.dataset, "dataset directory")->required();
    c_ev->add_option("--model", ev.model, "model file")->required();
    c_ev->add_option("--samples", ev.samples, "held-out target count");
    c_ev->add_option("--sampler", ev.sampler, "dpmpp | langevin");
    c_ev->add_option("--candidates", ev.candidates, "candidates per target (0 = default)");
    c_ev->add_option("--seed", ev.seed, "sampling seed");
    c_ev->add_option("--workers", ev.workers, "worker threads");
    c_ev->add_option("--out-csv", ev.out_csv, "CSV report path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        app.exit(e);
        return cli::kExitUsage;
    }

    try {
        if (c_dg->parsed()) {
            dg.augment = augment_tok == "on";
            if (c_dg->count("--no-timestamp") == 0) dg.created = now_string();
            return run_dataset_gen(dg);
        }
        if (c_tr->parsed()) return run_train(tr);
        if (c_gen->parsed()) return run_generate(gen);
        if (c_rk->parsed()) return run_rank(rk);
        if (c_vec->parsed()) return run_vectorize(vec);
        if (c_ev->parsed()) return run_eval(ev);
    } catch (const TouchstoneError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kExitFormat;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kExitUsage;
    } catch (const std::runtime_error& e) {
        // File and format problems map to 3, numeric trouble to 4.
        std::string msg = e.what();
        std::cerr << "error: " << msg << "\n";
        if (msg.find("CRC") != std::string::npos || msg.find("truncated") != std::string::npos ||
            msg.find("magic") != std::string::npos ||
            msg.find("cannot open") != std::string::npos ||
            msg.find("manifest") != std::string::npos ||
            msg.find("wrong size") != std::string::npos)
            return cli::kExitFormat;
        return cli::kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kExitNumeric;
    }
    return cli::kExitUsage;
}
