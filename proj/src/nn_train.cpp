#include "unimat/nn_train.hpp"

#include <cmath>
#include <cstring>

#include <json.hpp>

#include "unimat/errors.hpp"

namespace unimat {

using nlohmann::json;

void train_config::validate() const {
    if (!(learning_rate > 0.0)) throw config_error("learning_rate must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw config_error("Adam betas must lie in [0, 1)");
    if (!(adam_eps > 0.0)) throw config_error("adam_eps must be positive");
    if (ema_decay < 0.0 || ema_decay >= 1.0) throw config_error("ema_decay must lie in [0, 1)");
    if (weight_decay < 0.0) throw config_error("weight_decay must be non-negative");
    if (batch_size < 1) throw config_error("batch_size must be at least 1");
    if (steps < 0) throw config_error("steps must be non-negative");
}

trainer::trainer(unet& model, const train_config& cfg, const diffusion_config& dcfg)
    : model_(model), cfg_(cfg), dcfg_(dcfg),
      rng_(derive_seed(cfg.seed, {hash_tag("train")})) {
    cfg_.validate();
    std::size_t count = model_.params().size();
    m_.assign(count, 0.0);
    v_.assign(count, 0.0);
    ema_ = model_.params().values();
}

double trainer::step(const training_batch& batch) {
    if (batch.n < 1) throw empty_input("empty training batch");
    int T = dcfg_.schedule.T;
    int dim = batch.dim;
    std::size_t total = static_cast<std::size_t>(batch.n) * dim;
    std::vector<double> tval(static_cast<std::size_t>(batch.n));
    std::vector<int> tstep(static_cast<std::size_t>(batch.n));
    std::vector<double> eps(total), xt(total);
    // Draw order is part of the checkpoint contract: per row the timestep then
    // that row's noise, then (aux models only) one dropout flag per row, then
    // whatever layer dropout consumes inside the forward pass.
    for (int r = 0; r < batch.n; ++r) {
        tstep[r] = 1 + static_cast<int>(rng_.uniform_int(static_cast<std::uint64_t>(T)));
        tval[r] = static_cast<double>(tstep[r]);
        double* er = eps.data() + static_cast<std::size_t>(r) * dim;
        for (int i = 0; i < dim; ++i) er[i] = rng_.gaussian();
        forward_noise(batch.x.data() + static_cast<std::size_t>(r) * dim, dim, tstep[r], er,
                      dcfg_.schedule, xt.data() + static_cast<std::size_t>(r) * dim);
    }
    const composition_cond* conds = batch.conds.empty() ? nullptr : batch.conds.data();
    std::vector<unsigned char> aux_mask;
    if (conds && model_.config().aux_channels > 0) {
        aux_mask.resize(static_cast<std::size_t>(batch.n));
        for (int r = 0; r < batch.n; ++r)
            aux_mask[static_cast<std::size_t>(r)] =
                rng_.uniform() >= dcfg_.cond_dropout ? 1 : 0;
    }
    predictor_batch pb{xt.data(), batch.n,
                       dim,       tval.data(),
                       conds,     aux_mask.empty() ? nullptr : aux_mask.data()};
    double loss = model_.loss_and_grad(pb, eps.data(), &rng_);

    ++step_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    std::vector<double>& p = model_.params().values();
    std::vector<double>& g = model_.params().grads();
    for (std::size_t i = 0; i < p.size(); ++i) {
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g[i];
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        double upd = (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + cfg_.adam_eps);
        p[i] -= cfg_.learning_rate * (upd + cfg_.weight_decay * p[i]);
        ema_[i] = cfg_.ema_decay * ema_[i] + (1.0 - cfg_.ema_decay) * p[i];
    }
    return loss;
}

void trainer::restore(std::int64_t step, const std::vector<double>& ema,
                      const std::vector<double>& m, const std::vector<double>& v,
                      const std::string& rng_state) {
    std::size_t count = model_.params().size();
    if (ema.size() != count || m.size() != count || v.size() != count)
        throw checkpoint_error("optimizer state size does not match model");
    if (step < 0) throw checkpoint_error("negative step count");
    step_ = step;
    ema_ = ema;
    m_ = m;
    v_ = v;
    rng_.load_state(rng_state);
}

double evaluate_loss(unet& model, const training_batch& batch, const diffusion_config& dcfg,
                     rng& r) {
    if (batch.n < 1) throw empty_input("empty batch");
    std::vector<int> tstep(static_cast<std::size_t>(batch.n));
    std::vector<double> eps(static_cast<std::size_t>(batch.n) * batch.dim);
    for (int row = 0; row < batch.n; ++row) {
        tstep[row] = 1 + static_cast<int>(
                             r.uniform_int(static_cast<std::uint64_t>(dcfg.schedule.T)));
        double* er = eps.data() + static_cast<std::size_t>(row) * batch.dim;
        for (int i = 0; i < batch.dim; ++i) er[i] = r.gaussian();
    }
    return training_loss(batch.x, batch.n, batch.dim, tstep, eps, dcfg.schedule,
                         model.as_predictor(),
                         batch.conds.empty() ? nullptr : batch.conds.data(), nullptr);
}

std::string encode_run_config(const run_config& rc) {
    json j;
    j["model"] = {{"base_channels", rc.model.base_channels},
                  {"channel_multipliers", rc.model.channel_multipliers},
                  {"blocks_per_resolution", rc.model.blocks_per_resolution},
                  {"attention_resolutions", rc.model.attention_resolutions},
                  {"attention_head_dim", rc.model.attention_head_dim},
                  {"dropout", rc.model.dropout},
                  {"time_embed_dim", rc.model.time_embed_dim},
                  {"cond_channels", rc.model.cond_channels},
                  {"aux_channels", rc.model.aux_channels}};
    j["shape"] = {{"L", rc.shape.L}, {"filter", rc.shape.filter}};
    j["train"] = {{"learning_rate", rc.train.learning_rate},
                  {"beta1", rc.train.beta1},
                  {"beta2", rc.train.beta2},
                  {"adam_eps", rc.train.adam_eps},
                  {"ema_decay", rc.train.ema_decay},
                  {"weight_decay", rc.train.weight_decay},
                  {"batch_size", rc.train.batch_size},
                  {"steps", rc.train.steps},
                  {"seed", rc.train.seed}};
    j["diffusion"] = {{"T", rc.diffusion.schedule.T},
                      {"log_snr_min", rc.diffusion.schedule.log_snr_min},
                      {"log_snr_max", rc.diffusion.schedule.log_snr_max},
                      {"sample_steps", rc.diffusion.sample_steps},
                      {"guidance_omega", rc.diffusion.guidance_omega},
                      {"variance_interp", rc.diffusion.variance_interp},
                      {"cell_scale", rc.diffusion.cell_scale},
                      {"cond_dropout", rc.diffusion.cond_dropout}};
    j["augment"] = {{"shuffle", rc.augment.shuffle},
                    {"rotate", rc.augment.rotate},
                    {"translate", rc.augment.translate},
                    {"seed", rc.augment.seed}};
    j["cond_mode"] = !rc.cond_mode ? json(nullptr)
                     : *rc.cond_mode == composition_cond::kind::types ? json("types")
                                                                      : json("exact");
    return j.dump();
}

run_config decode_run_config(const std::string& text) {
    try {
        json j = json::parse(text);
        run_config rc;
        const json& m = j.at("model");
        rc.model.base_channels = m.at("base_channels").get<int>();
        rc.model.channel_multipliers = m.at("channel_multipliers").get<std::vector<int>>();
        rc.model.blocks_per_resolution = m.at("blocks_per_resolution").get<int>();
        rc.model.attention_resolutions = m.at("attention_resolutions").get<std::vector<int>>();
        rc.model.attention_head_dim = m.at("attention_head_dim").get<int>();
        rc.model.dropout = m.at("dropout").get<double>();
        rc.model.time_embed_dim = m.at("time_embed_dim").get<int>();
        rc.model.cond_channels = m.at("cond_channels").get<int>();
        rc.model.aux_channels = m.at("aux_channels").get<int>();
        const json& s = j.at("shape");
        std::vector<int> filter = s.at("filter").get<std::vector<int>>();
        int L = s.at("L").get<int>();
        rc.shape = filter.empty() ? system_shape::full(L)
                                  : system_shape::reduced(L, std::move(filter));
        const json& t = j.at("train");
        rc.train.learning_rate = t.at("learning_rate").get<double>();
        rc.train.beta1 = t.at("beta1").get<double>();
        rc.train.beta2 = t.at("beta2").get<double>();
        rc.train.adam_eps = t.at("adam_eps").get<double>();
        rc.train.ema_decay = t.at("ema_decay").get<double>();
        rc.train.weight_decay = t.at("weight_decay").get<double>();
        rc.train.batch_size = t.at("batch_size").get<int>();
        rc.train.steps = t.at("steps").get<std::int64_t>();
        rc.train.seed = t.at("seed").get<std::uint64_t>();
        const json& d = j.at("diffusion");
        rc.diffusion.schedule = noise_schedule::cosine(d.at("T").get<int>(),
                                                       d.at("log_snr_min").get<double>(),
                                                       d.at("log_snr_max").get<double>());
        rc.diffusion.sample_steps = d.at("sample_steps").get<int>();
        rc.diffusion.guidance_omega = d.at("guidance_omega").get<double>();
        rc.diffusion.variance_interp = d.at("variance_interp").get<double>();
        rc.diffusion.cell_scale = d.at("cell_scale").get<std::array<double, 6>>();
        rc.diffusion.cond_dropout = d.at("cond_dropout").get<double>();
        const json& a = j.at("augment");
        rc.augment.shuffle = a.at("shuffle").get<bool>();
        rc.augment.rotate = a.at("rotate").get<bool>();
        rc.augment.translate = a.at("translate").get<bool>();
        rc.augment.seed = a.at("seed").get<std::uint64_t>();
        const json& cm = j.at("cond_mode");
        if (!cm.is_null()) {
            std::string v = cm.get<std::string>();
            if (v == "types")
                rc.cond_mode = composition_cond::kind::types;
            else if (v == "exact")
                rc.cond_mode = composition_cond::kind::exact;
            else
                throw checkpoint_error("unknown cond_mode: " + v);
        }
        return rc;
    } catch (const json::exception& e) {
        throw checkpoint_error(std::string("bad run config echo: ") + e.what());
    }
}

checkpoint_data train(const std::vector<structure_record>& corpus, const run_config& rc,
                      const std::string& resume_from, const train_callbacks& cb) {
    rc.model.validate();
    rc.train.validate();
    int want_cond = rc.cond_mode ? 1 : 0;
    if (rc.model.cond_channels != want_cond)
        throw config_error("model cond_channels does not match the conditioning mode");

    unet model(rc.model, rc.shape, derive_seed(rc.train.seed, {hash_tag("init")}));
    batch_stream stream(corpus, rc.shape, rc.train.batch_size, rc.augment, rc.cond_mode,
                        rc.train.seed, rc.diffusion.cell_scale);
    trainer tr(model, rc.train, rc.diffusion);
    std::string echo = encode_run_config(rc);

    if (!resume_from.empty()) {
        checkpoint_data ck = load_checkpoint(resume_from);
        if (ck.config_json != echo)
            throw checkpoint_error("checkpoint config does not match the run config: " +
                                   resume_from);
        model.params().values() = flat_from_arrays(model.params(), ck.params);
        tr.restore(ck.step, flat_from_arrays(model.params(), ck.ema),
                   flat_from_arrays(model.params(), ck.adam_m),
                   flat_from_arrays(model.params(), ck.adam_v), ck.rng_state);
        stream.restore(ck.stream);
    }

    if (cb.on_log) {
        // Probes run on copies so logging never perturbs resumable state.
        batch_stream probe = stream;
        rng probe_rng(derive_seed(rc.train.seed, {hash_tag("eval-loss")}));
        cb.on_log(tr.steps_done(), evaluate_loss(model, probe.next(), rc.diffusion, probe_rng));
    }
    std::int64_t log_every = cb.log_every > 0 ? cb.log_every : 100;
    while (tr.steps_done() < rc.train.steps) {
        training_batch b = stream.next();
        double loss = tr.step(b);
        if (cb.on_log &&
            (tr.steps_done() % log_every == 0 || tr.steps_done() == rc.train.steps))
            cb.on_log(tr.steps_done(), loss);
    }

    checkpoint_data out;
    out.config_json = echo;
    out.step = tr.steps_done();
    out.params = arrays_from_values(model.params(), model.params().values());
    out.ema = arrays_from_values(model.params(), tr.ema());
    out.adam_m = arrays_from_values(model.params(), tr.adam_m());
    out.adam_v = arrays_from_values(model.params(), tr.adam_v());
    out.rng_state = tr.rng_state();
    out.stream = stream.state();
    return out;
}

unet model_from_checkpoint(const checkpoint_data& ck, bool use_ema, run_config* rc_out) {
    run_config rc = decode_run_config(ck.config_json);
    unet model(rc.model, rc.shape, derive_seed(rc.train.seed, {hash_tag("init")}));
    model.params().values() = flat_from_arrays(model.params(), use_ema ? ck.ema : ck.params);
    if (rc_out) *rc_out = std::move(rc);
    return model;
}

} // namespace unimat
