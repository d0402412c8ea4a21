#include <CLI11.hpp>
#include <cblas.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "xing/checkpoint.hpp"
#include "xing/config.hpp"
#include "xing/gradcheck.hpp"
#include "xing/image_io.hpp"
#include "xing/trainer.hpp"

namespace fs = std::filesystem;
using namespace xing;

namespace {

struct SeedOpt {
    std::uint64_t value = 0;
    bool set = false;
};

void add_seed(CLI::App* cmd, SeedOpt& seed, const char* help) {
    cmd->add_option_function<std::uint64_t>(
           "--seed", [&seed](std::uint64_t v) { seed = {v, true}; }, help)
        ->expected(1);
}

Model load_model(const std::string& path, const SeedOpt& seed) {
    Model m = Model::from_checkpoint(load_checkpoint(path));
    if (seed.set) m.cfg.master_seed = seed.value;
    return m;
}

int cmd_train(const std::string& config_path, const std::string& resume_path,
              const SeedOpt& seed, const std::string& out_dir) {
    if (config_path.empty() == resume_path.empty())
        throw ConfigError("train needs exactly one of --config or --resume");
    if (!resume_path.empty() && seed.set)
        throw ConfigError("--seed cannot override a checkpointed run");
    Model model = [&] {
        if (!resume_path.empty()) return Model::from_checkpoint(load_checkpoint(resume_path));
        TrainConfig cfg = load_config(config_path);
        if (cfg.iteration != 0)
            throw ConfigError("iteration is written by checkpoints; use --resume to continue");
        if (seed.set) cfg.master_seed = seed.value;
        return Model::init(cfg);
    }();
    TrainResult r = train(model, out_dir);
    std::printf("trained %ld iterations\n", r.iterations_run);
    std::printf("first eval: ssim %.4f mask_ssim %.4f pckh %.4f l1 %.4f\n", r.first_eval.ssim,
                r.first_eval.mask_ssim, r.first_eval.pckh, r.first_eval.l1);
    std::printf("last eval:  ssim %.4f mask_ssim %.4f pckh %.4f l1 %.4f\n", r.last_eval.ssim,
                r.last_eval.mask_ssim, r.last_eval.pckh, r.last_eval.l1);
    std::printf("final checkpoint: %s\n", r.final_checkpoint.c_str());
    return 0;
}

int cmd_eval(const std::string& ckpt, const SeedOpt& seed, const std::string& out_dir,
             bool pass_through) {
    Model model = load_model(ckpt, seed);
    EvalReport r = evaluate(model.g, model.cfg, pass_through);
    std::string text = eval_csv_header() + '\n' + eval_csv_row(model.cfg.iteration, r) + '\n';
    std::fputs(text.c_str(), stdout);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::string path = (fs::path(out_dir) / "eval.csv").string();
        std::ofstream f(path, std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open for writing: " + path);
        f << text;
    }
    return 0;
}

int cmd_generate(const std::string& ckpt, const SeedOpt& seed, int count,
                 const std::string& out_dir) {
    Model model = load_model(ckpt, seed);
    auto files = generate_images(model.g, model.cfg, count, out_dir);
    std::printf("wrote %zu files to %s\n", files.size(), out_dir.c_str());
    return 0;
}

int cmd_dump_attention(const std::string& ckpt, const SeedOpt& seed, int sample,
                       const std::string& out_dir) {
    Model model = load_model(ckpt, seed);
    auto files = dump_attention(model.g, model.cfg, sample, out_dir);
    std::printf("wrote %zu files to %s\n", files.size(), out_dir.c_str());
    return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
    auto items = run_gradient_suite(seed);
    for (const auto& it : items)
        std::printf("%-24s max_rel_err %.3e  tol %.0e  %s\n", it.name.c_str(), it.max_rel_err,
                    it.tolerance, it.pass ? "PASS" : "FAIL");
    if (!all_pass(items)) {
        std::fprintf(stderr, "gradient check failed\n");
        return 2;
    }
    std::printf("all %zu gradient checks passed\n", items.size());
    return 0;
}

int cmd_synth_preview(std::uint64_t master_seed, int count, const std::string& out_dir) {
    if (count < 1) throw std::invalid_argument("synth-preview: count must be >= 1");
    fs::create_directories(out_dir);
    const int h = 64, w = 32;
    for (int k = 0; k < count; ++k) {
        SampleRecord rec;
        rec.identity_id = k % kTrainIdentityEnd;
        rec.pair_index = k / kTrainIdentityEnd;
        rec.seed = derive_seed(master_seed,
                               {kStreamPair, static_cast<std::uint64_t>(rec.identity_id),
                                static_cast<std::uint64_t>(rec.pair_index)});
        SamplePair<float> sp = make_sample<float>(master_seed, rec, h, w);
        char buf[64];
        std::snprintf(buf, sizeof buf, "preview_%03d_source.png", k);
        write_png((fs::path(out_dir) / buf).string(), sp.i_s);
        std::snprintf(buf, sizeof buf, "preview_%03d_target.png", k);
        write_png((fs::path(out_dir) / buf).string(), sp.i_t);
        // Heatmap stack collapsed to its per-pixel max, for a quick look.
        Tensor<float> pose({h, w});
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                float m = 0.0f;
                for (int c = 0; c < kNumJoints; ++c)
                    m = std::max(m, sp.p_t.at({c, y, x}));
                pose.at({y, x}) = m;
            }
        std::snprintf(buf, sizeof buf, "preview_%03d_pose.png", k);
        write_gray_png((fs::path(out_dir) / buf).string(), pose);
    }
    std::printf("wrote %d previews to %s\n", count, out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    openblas_set_num_threads(1);

    CLI::App app{"Pose-conditioned person image generation on synthetic stick figures"};
    app.require_subcommand(1);

    SeedOpt seed;
    std::string config_path, resume_path, ckpt_path;
    std::string train_out = "out", eval_out, gen_out = "out", dump_out = "out",
                preview_out = "out";
    int count = 8, sample = 0;
    bool pass_through = false;
    std::uint64_t gc_seed = 99, preview_seed = 42;

    CLI::App* t = app.add_subcommand("train", "Train a model from a config file");
    t->add_option("--config", config_path, "Config file (key=value lines)");
    t->add_option("--resume", resume_path, "Continue from a checkpoint");
    t->add_option("--out", train_out, "Output directory");
    add_seed(t, seed, "Override the config's master seed");

    CLI::App* e = app.add_subcommand("eval", "Score a checkpoint on held-out identities");
    e->add_option("--checkpoint", ckpt_path, "Checkpoint to score")->required();
    e->add_option("--out", eval_out, "Directory to also write eval.csv into");
    e->add_flag("--pass-through", pass_through,
                "Score targets against themselves to pin the metric pipeline");
    add_seed(e, seed, "Override the checkpoint's master seed");

    CLI::App* g = app.add_subcommand("generate", "Write source/target/generated image triples");
    g->add_option("--checkpoint", ckpt_path, "Checkpoint to run")->required();
    g->add_option("--count", count, "Number of held-out samples");
    g->add_option("--out", gen_out, "Output directory");
    add_seed(g, seed, "Override the checkpoint's master seed");

    CLI::App* d = app.add_subcommand("dump-attention", "Export attention maps and intermediates");
    d->add_option("--checkpoint", ckpt_path, "Checkpoint to inspect")->required();
    d->add_option("--sample", sample, "Held-out sample index");
    d->add_option("--out", dump_out, "Output directory");
    add_seed(d, seed, "Override the checkpoint's master seed");

    CLI::App* gc = app.add_subcommand("gradcheck", "Run the gradient audit");
    gc->add_option("--seed", gc_seed, "Audit seed");

    CLI::App* sp = app.add_subcommand("synth-preview", "Render dataset samples for inspection");
    sp->add_option("--seed", preview_seed, "Master seed");
    sp->add_option("--count", count, "Number of pairs");
    sp->add_option("--out", preview_out, "Output directory");

    try {
        app.parse(argc, argv);
        if (t->parsed()) return cmd_train(config_path, resume_path, seed, train_out);
        if (e->parsed()) return cmd_eval(ckpt_path, seed, eval_out, pass_through);
        if (g->parsed()) return cmd_generate(ckpt_path, seed, count, gen_out);
        if (d->parsed()) return cmd_dump_attention(ckpt_path, seed, sample, dump_out);
        if (gc->parsed()) return cmd_gradcheck(gc_seed);
        if (sp->parsed()) return cmd_synth_preview(preview_seed, count, preview_out);
        return 1;
    } catch (const CLI::ParseError& pe) {
        int rc = app.exit(pe);
        return rc == 0 ? 0 : 1;
    } catch (const ConfigError& ce) {
        std::fprintf(stderr, "config error: %s\n", ce.what());
        return 1;
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 2;
    }
}
