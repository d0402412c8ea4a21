#include "xing/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "xing/image_io.hpp"
#include "xing/ops.hpp"
#include "xing/rng.hpp"

namespace fs = std::filesystem;

namespace xing {

namespace {

std::vector<Var<float>> collect_encoder_like(std::vector<std::pair<std::string, Var<float>*>>& all,
                                             const std::string& prefix) {
    std::vector<Var<float>> out;
    for (auto& [name, p] : all)
        if (name.rfind(prefix, 0) == 0) out.push_back(*p);
    return out;
}

void append_moments(std::vector<NamedTensor>& ts, Adam& adam,
                    const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i)
        ts.push_back({"adam.m." + names[i], adam.moment_m(i)});
    for (std::size_t i = 0; i < names.size(); ++i)
        ts.push_back({"adam.v." + names[i], adam.moment_v(i)});
}

void restore_moments(const Checkpoint& ck, Adam& adam, const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i) {
        const Tensor<float>* m = ck.find("adam.m." + names[i]);
        const Tensor<float>* v = ck.find("adam.v." + names[i]);
        if (!m || !v)
            throw CheckpointError("checkpoint missing optimizer state for '" + names[i] + "'");
        if (m->shape != adam.moment_m(i).shape || v->shape != adam.moment_v(i).shape)
            throw CheckpointError("optimizer state shape mismatch for '" + names[i] + "'");
        adam.moment_m(i) = *m;
        adam.moment_v(i) = *v;
    }
}

std::vector<std::string> prefixed_names(std::vector<std::pair<std::string, Var<float>*>>& all,
                                        const std::string& prefix) {
    std::vector<std::string> out;
    for (auto& [name, p] : all)
        if (name.rfind(prefix, 0) == 0) out.push_back(name);
    return out;
}

SampleRecord eval_record(const TrainConfig& cfg, int k) {
    const int span = kEvalIdentityEnd - kEvalIdentityBegin;
    SampleRecord rec;
    rec.identity_id = kEvalIdentityBegin + k % span;
    rec.pair_index = k / span;
    rec.seed = derive_seed(cfg.master_seed,
                           {kStreamPair, static_cast<std::uint64_t>(rec.identity_id),
                            static_cast<std::uint64_t>(rec.pair_index)});
    return rec;
}

Tensor<float> run_generator(const GeneratorParams<float>& g, const SamplePair<float>& sp) {
    Var<float> i_s = Var<float>::constant(sp.i_s);
    Var<float> p_s = Var<float>::constant(sp.p_s);
    Var<float> p_t = Var<float>::constant(sp.p_t);
    return xing_generator_forward(i_s, p_s, p_t, g).final_image.value();
}

Tensor<float> channel_slice(const Tensor<float>& t, int c) {
    Tensor<float> out({static_cast<int>(t.shape[1]), static_cast<int>(t.shape[2])});
    std::size_t plane = out.numel();
    std::copy(t.data.begin() + c * plane, t.data.begin() + (c + 1) * plane, out.data.begin());
    return out;
}

std::string ckpt_name(long iteration) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "checkpoint_%06ld.xgck", iteration);
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << text;
}

}  // namespace

Model Model::init(const TrainConfig& cfg0) {
    TrainConfig cfg = cfg0;
    cfg.validate();
    Model m{cfg,
            GeneratorParams<float>(),
            DiscriminatorParams<float>(),
            DiscriminatorParams<float>(),
            Adam(cfg.lr, cfg.beta1, cfg.beta2),
            Adam(cfg.lr, cfg.beta1, cfg.beta2),
            Adam(cfg.lr, cfg.beta1, cfg.beta2)};
    Rng rg(derive_seed(cfg.master_seed, {kStreamParams, 0}));
    Rng rdi(derive_seed(cfg.master_seed, {kStreamParams, 1}));
    Rng rdp(derive_seed(cfg.master_seed, {kStreamParams, 2}));
    m.g = GeneratorParams<float>::init(cfg.variant, cfg.t_blocks, cfg.n_images, cfg.channels, rg);
    m.d_i = DiscriminatorParams<float>::init(3, rdi);
    m.d_p = DiscriminatorParams<float>::init(kNumJoints, rdp);

    auto all = m.named_params();
    m.adam_g.attach(collect_encoder_like(all, "g."));
    m.adam_di.attach(collect_encoder_like(all, "d_i."));
    m.adam_dp.attach(collect_encoder_like(all, "d_p."));
    m.adam_g.set_step_count(cfg.iteration);
    m.adam_di.set_step_count(cfg.iteration);
    m.adam_dp.set_step_count(cfg.iteration);
    return m;
}

std::vector<std::pair<std::string, Var<float>*>> Model::named_params() {
    std::vector<std::pair<std::string, Var<float>*>> out;
    g.visit([&](const std::string& name, Var<float>& v) { out.emplace_back("g." + name, &v); });
    d_i.visit("d_i", [&](const std::string& name, Var<float>& v) { out.emplace_back(name, &v); });
    d_p.visit("d_p", [&](const std::string& name, Var<float>& v) { out.emplace_back(name, &v); });
    return out;
}

Checkpoint Model::to_checkpoint() const {
    Model& self = const_cast<Model&>(*this);
    Checkpoint ck;
    ck.config_text = serialize_config(cfg);
    auto all = self.named_params();
    for (auto& [name, p] : all) ck.tensors.push_back({name, p->value()});
    append_moments(ck.tensors, self.adam_g, prefixed_names(all, "g."));
    append_moments(ck.tensors, self.adam_di, prefixed_names(all, "d_i."));
    append_moments(ck.tensors, self.adam_dp, prefixed_names(all, "d_p."));
    return ck;
}

Model Model::from_checkpoint(const Checkpoint& ck) {
    TrainConfig cfg = parse_config(ck.config_text);
    Model m = Model::init(cfg);
    auto all = m.named_params();
    for (auto& [name, p] : all) {
        const Tensor<float>* t = ck.find(name);
        if (!t) throw CheckpointError("checkpoint missing tensor '" + name + "'");
        if (t->shape != p->value().shape)
            throw CheckpointError("checkpoint tensor '" + name + "' has shape " +
                                  shape_str(t->shape) + ", model expects " +
                                  shape_str(p->value().shape));
        p->mutable_value() = *t;
    }
    restore_moments(ck, m.adam_g, prefixed_names(all, "g."));
    restore_moments(ck, m.adam_di, prefixed_names(all, "d_i."));
    restore_moments(ck, m.adam_dp, prefixed_names(all, "d_p."));
    return m;
}

Sampler::Sampler(std::uint64_t master_seed, std::vector<SampleRecord> records)
    : master_(master_seed), records_(std::move(records)) {
    if (records_.empty()) throw std::invalid_argument("sampler needs a non-empty manifest");
    reshuffle();
}

void Sampler::reshuffle() {
    perm_.resize(records_.size());
    for (std::size_t i = 0; i < perm_.size(); ++i) perm_[i] = i;
    Rng rng(derive_seed(master_, {kStreamBatch, static_cast<std::uint64_t>(epoch_)}));
    rng.shuffle(perm_.begin(), perm_.end());
}

const SampleRecord& Sampler::next() {
    if (cursor_ == size()) {
        ++epoch_;
        cursor_ = 0;
        reshuffle();
    }
    return records_[perm_[static_cast<std::size_t>(cursor_++)]];
}

void Sampler::seek(long draws) {
    if (draws < 0) throw std::invalid_argument("sampler seek must be >= 0");
    epoch_ = draws / size();
    cursor_ = draws % size();
    reshuffle();
}

EvalReport evaluate(const GeneratorParams<float>& g, const TrainConfig& cfg, bool pass_through) {
    EvalReport r;
    double ssim_sum = 0.0, mask_sum = 0.0, l1_sum = 0.0, pckh_sum = 0.0;
    int pckh_n = 0;
    for (int k = 0; k < cfg.eval_samples; ++k) {
        SampleRecord rec = eval_record(cfg, k);
        SamplePair<float> sp =
            make_sample<float>(cfg.master_seed, rec, cfg.image_h, cfg.image_w, cfg.sigma);
        Tensor<float> fake = pass_through ? sp.i_t : run_generator(g, sp);
        ssim_sum += ssim(fake, sp.i_t);
        BinaryMask mask = pose_mask(sp.sk_t, cfg.image_h, cfg.image_w);
        mask_sum += mask_ssim(fake, sp.i_t, mask);
        l1_sum += l1_metric(fake, sp.i_t);
        auto pk = pckh(detect_joints(fake), sp.sk_t);
        if (pk) {
            pckh_sum += *pk;
            ++pckh_n;
        } else {
            ++r.n_skipped;
        }
    }
    r.n_samples = cfg.eval_samples;
    r.ssim = ssim_sum / cfg.eval_samples;
    r.mask_ssim = mask_sum / cfg.eval_samples;
    r.l1 = l1_sum / cfg.eval_samples;
    r.pckh = pckh_n > 0 ? pckh_sum / pckh_n : 0.0;
    return r;
}

TrainResult train(Model& model, const std::string& out_dir) {
    TrainConfig& cfg = model.cfg;
    cfg.validate();
    if (cfg.iteration > cfg.iterations)
        throw std::invalid_argument("checkpoint iteration is past the configured end");
    fs::create_directories(out_dir);
    fs::path dir(out_dir);

    write_text((dir / "config_used.txt").string(), serialize_config(cfg));

    std::vector<SampleRecord> records =
        make_manifest(cfg.master_seed, kTrainIdentityBegin, kTrainIdentityEnd, cfg.train_pairs);
    write_text((dir / "train_manifest.csv").string(), manifest_text(records));
    Sampler sampler(cfg.master_seed, records);
    sampler.seek(cfg.iteration * cfg.batch_size);

    FeatureExtractor<float> fx(kExtractorSeed);
    LossWeights lw;
    lw.lambda_gan = cfg.lambda_gan;
    lw.lambda_l1 = cfg.lambda_l1;
    lw.lambda_p = cfg.lambda_p;

    const bool fresh = cfg.iteration == 0;
    auto mode = fresh ? std::ios::trunc : std::ios::app;
    std::ofstream train_log((dir / "train_log.csv").string(), mode);
    std::ofstream metrics_log((dir / "metrics.csv").string(), mode);
    if (!train_log || !metrics_log)
        throw std::runtime_error("cannot open log files in " + out_dir);
    if (fresh) {
        train_log << "iteration,d_i,d_p,g_adv,g_l1,g_p,g_total\n";
        metrics_log << eval_csv_header() << '\n';
    }

    TrainResult result;
    long last_eval_step = -1;
    result.first_eval = evaluate(model.g, cfg);
    if (fresh) {
        metrics_log << eval_csv_row(0, result.first_eval) << '\n';
        metrics_log.flush();
        last_eval_step = 0;
    }
    result.last_eval = result.first_eval;

    auto all = model.named_params();
    auto zero_all = [&] {
        for (auto& [name, p] : all) p->zero_grad();
    };

    const int B = cfg.batch_size;
    const float inv_b = 1.0f / static_cast<float>(B);

    for (long it = cfg.iteration; it < cfg.iterations; ++it) {
        std::vector<SamplePair<float>> batch;
        batch.reserve(B);
        for (int b = 0; b < B; ++b)
            batch.push_back(make_sample<float>(cfg.master_seed, sampler.next(), cfg.image_h,
                                               cfg.image_w, cfg.sigma));

        std::vector<Var<float>> cond_i, cond_p, real_i, fakes;
        for (const SamplePair<float>& sp : batch) {
            Var<float> i_s = Var<float>::constant(sp.i_s);
            Var<float> p_s = Var<float>::constant(sp.p_s);
            Var<float> p_t = Var<float>::constant(sp.p_t);
            cond_i.push_back(i_s);
            cond_p.push_back(p_t);
            real_i.push_back(Var<float>::constant(sp.i_t));
            fakes.push_back(xing_generator_forward(i_s, p_s, p_t, model.g).final_image);
        }

        // Discriminator updates see the generator output as data.
        auto disc_phase = [&](DiscriminatorParams<float>& d, const std::vector<Var<float>>& cond,
                              Adam& adam) {
            zero_all();
            Var<float> acc;
            for (int b = 0; b < B; ++b) {
                Var<float> real = discriminator_forward(cond[b], real_i[b], d);
                Var<float> fake = discriminator_forward(cond[b], fakes[b].detach(), d);
                Var<float> term = gan_loss_d(real, fake);
                acc = b == 0 ? term : add(acc, term);
            }
            Var<float> loss = scale(acc, inv_b);
            loss.backward();
            adam.step();
            return static_cast<double>(loss.value().data[0]);
        };
        double d_i_loss = disc_phase(model.d_i, cond_i, model.adam_di);
        double d_p_loss = disc_phase(model.d_p, cond_p, model.adam_dp);

        // Generator update against the refreshed discriminators.
        zero_all();
        Var<float> g_acc;
        double adv_sum = 0.0, l1_sum = 0.0, p_sum = 0.0;
        for (int b = 0; b < B; ++b) {
            Var<float> adv_i = gan_loss_g(discriminator_forward(cond_i[b], fakes[b], model.d_i));
            Var<float> adv_p = gan_loss_g(discriminator_forward(cond_p[b], fakes[b], model.d_p));
            Var<float> adv = combine_adversarial(adv_i, adv_p, !cfg.gan_sum);
            Var<float> l1 = l1_loss(fakes[b], real_i[b]);
            Var<float> perc = perceptual_loss(fakes[b], real_i[b], fx);
            Var<float> total = total_loss(adv, l1, perc, lw);
            adv_sum += adv.value().data[0];
            l1_sum += l1.value().data[0];
            p_sum += perc.value().data[0];
            g_acc = b == 0 ? total : add(g_acc, total);
        }
        Var<float> g_loss = scale(g_acc, inv_b);
        g_loss.backward();
        model.adam_g.step();
        zero_all();

        double g_total = g_loss.value().data[0];
        double g_adv = adv_sum / B, g_l1 = l1_sum / B, g_p = p_sum / B;

        char line[256];
        std::snprintf(line, sizeof line, "%ld,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", it, d_i_loss,
                      d_p_loss, g_adv, g_l1, g_p, g_total);
        train_log << line;
        train_log.flush();

        bool finite = std::isfinite(d_i_loss) && std::isfinite(d_p_loss) && std::isfinite(g_adv) &&
                      std::isfinite(g_l1) && std::isfinite(g_p) && std::isfinite(g_total);
        if (!finite) throw TrainAbort(it);

        cfg.iteration = it + 1;
        ++result.iterations_run;

        if ((it + 1) % cfg.eval_every == 0) {
            result.last_eval = evaluate(model.g, cfg);
            metrics_log << eval_csv_row(it + 1, result.last_eval) << '\n';
            metrics_log.flush();
            last_eval_step = it + 1;
        }
        if ((it + 1) % cfg.checkpoint_every == 0) {
            std::string path = (dir / ckpt_name(it + 1)).string();
            save_checkpoint(path, model.to_checkpoint());
            result.checkpoint_paths.push_back(path);
        }
    }

    if (last_eval_step != cfg.iterations) {
        result.last_eval = evaluate(model.g, cfg);
        metrics_log << eval_csv_row(cfg.iterations, result.last_eval) << '\n';
        metrics_log.flush();
    }
    result.final_checkpoint = (dir / "checkpoint_final.xgck").string();
    save_checkpoint(result.final_checkpoint, model.to_checkpoint());
    result.checkpoint_paths.push_back(result.final_checkpoint);
    return result;
}

std::vector<std::string> generate_images(const GeneratorParams<float>& g, const TrainConfig& cfg,
                                         int count, const std::string& out_dir) {
    if (count < 1) throw std::invalid_argument("generate: count must be >= 1");
    fs::create_directories(out_dir);
    fs::path dir(out_dir);
    std::vector<std::string> written;
    for (int k = 0; k < count; ++k) {
        SampleRecord rec = eval_record(cfg, k);
        SamplePair<float> sp =
            make_sample<float>(cfg.master_seed, rec, cfg.image_h, cfg.image_w, cfg.sigma);
        Tensor<float> fake = run_generator(g, sp);
        char buf[64];
        std::snprintf(buf, sizeof buf, "source_%03d.png", k);
        write_png((dir / buf).string(), sp.i_s);
        written.push_back(buf);
        std::snprintf(buf, sizeof buf, "target_%03d.png", k);
        write_png((dir / buf).string(), sp.i_t);
        written.push_back(buf);
        std::snprintf(buf, sizeof buf, "generated_%03d.png", k);
        write_png((dir / buf).string(), fake);
        written.push_back(buf);
    }
    return written;
}

std::vector<std::string> dump_attention(const GeneratorParams<float>& g, const TrainConfig& cfg,
                                        int sample_index, const std::string& out_dir) {
    if (g.variant != Variant::FULL)
        throw std::invalid_argument("attention dump needs the FULL variant, this model is " +
                                    variant_name(g.variant));
    if (sample_index < 0) throw std::invalid_argument("attention dump: sample index must be >= 0");
    fs::create_directories(out_dir);
    fs::path dir(out_dir);

    SampleRecord rec = eval_record(cfg, sample_index);
    SamplePair<float> sp =
        make_sample<float>(cfg.master_seed, rec, cfg.image_h, cfg.image_w, cfg.sigma);
    Var<float> i_s = Var<float>::constant(sp.i_s);
    Var<float> p_s = Var<float>::constant(sp.p_s);
    Var<float> p_t = Var<float>::constant(sp.p_t);
    GenOutput<float> out = xing_generator_forward(i_s, p_s, p_t, g);

    const int n = cfg.n_images;
    const int maps = 2 * n + 1;
    const Tensor<float>& att = out.attention.value();

    // The blend weights must form a per-pixel simplex before anything is
    // normalized for export.
    std::size_t plane = static_cast<std::size_t>(cfg.image_h) * cfg.image_w;
    for (std::size_t px = 0; px < plane; ++px) {
        double acc = 0.0;
        for (int c = 0; c < maps; ++c) acc += att.data[c * plane + px];
        if (std::abs(acc - 1.0) > 1e-5)
            throw std::runtime_error("attention maps do not sum to one at pixel " +
                                     std::to_string(px));
    }

    std::vector<std::string> written;
    auto emit = [&](const std::string& name, const std::vector<std::uint8_t>& png) {
        write_file((dir / name).string(), png);
        written.push_back(name);
    };

    char buf[64];
    for (int c = 0; c < maps; ++c) {
        std::snprintf(buf, sizeof buf, "attention_%02d.png", c);
        Tensor<float> map = channel_slice(att, c);
        emit(buf, encode_png_rgb(gray_cell(map), cfg.image_h, cfg.image_w));
    }
    for (int k = 0; k < n; ++k) {
        std::snprintf(buf, sizeof buf, "intermediate_i_%02d.png", k);
        emit(buf, encode_png(out.inter_i[static_cast<std::size_t>(k)].value()));
    }
    for (int k = 0; k < n; ++k) {
        std::snprintf(buf, sizeof buf, "intermediate_p_%02d.png", k);
        emit(buf, encode_png(out.inter_p[static_cast<std::size_t>(k)].value()));
    }
    emit("source.png", encode_png(sp.i_s));
    emit("target.png", encode_png(sp.i_t));
    emit("generated.png", encode_png(out.final_image.value()));

    // Contact sheet, one row per family: appearance intermediates, shape
    // intermediates, appearance attention, shape attention, then
    // source / target / generated / input-candidate attention.
    const long cols = std::max(n, 4);
    const std::size_t cell = 3u * static_cast<std::size_t>(cfg.image_h) * cfg.image_w;
    std::vector<std::vector<std::uint8_t>> cells;
    auto pad_row = [&](long used) {
        for (long c = used; c < cols; ++c) cells.emplace_back(cell, 0);
    };
    for (int k = 0; k < n; ++k) cells.push_back(rgb_cell(out.inter_i[k].value()));
    pad_row(n);
    for (int k = 0; k < n; ++k) cells.push_back(rgb_cell(out.inter_p[k].value()));
    pad_row(n);
    for (int c = 0; c < n; ++c) cells.push_back(gray_cell(channel_slice(att, c)));
    pad_row(n);
    for (int c = n; c < 2 * n; ++c) cells.push_back(gray_cell(channel_slice(att, c)));
    pad_row(n);
    cells.push_back(rgb_cell(sp.i_s));
    cells.push_back(rgb_cell(sp.i_t));
    cells.push_back(rgb_cell(out.final_image.value()));
    cells.push_back(gray_cell(channel_slice(att, 2 * n)));
    pad_row(4);
    long gh = 0, gw = 0;
    std::vector<std::uint8_t> sheet =
        tile_grid(cells, cfg.image_h, cfg.image_w, cols, &gh, &gw);
    emit("grid.png", encode_png_rgb(sheet, gh, gw));
    return written;
}

}  // namespace xing
