// Single entry point for the desk-scale materials generation pipeline:
// corpus generation, tensor codec, diffusion training/sampling, proxy and
// stability evaluation, set comparison, random-search baseline, and report
// assembly.  Every verb writes one run directory with a resolved-config echo;
// all randomness derives from run.seed.
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "unimat/airss.hpp"
#include "unimat/cif.hpp"
#include "unimat/compare.hpp"
#include "unimat/config.hpp"
#include "unimat/dataset.hpp"
#include "unimat/energy.hpp"
#include "unimat/formula.hpp"
#include "unimat/hull.hpp"
#include "unimat/kernels.hpp"
#include "unimat/log.hpp"
#include "unimat/metrics.hpp"
#include "unimat/nn_train.hpp"
#include "unimat/relax.hpp"

namespace fs = std::filesystem;
using namespace unimat;

namespace {

std::map<std::string, std::string> schema_defaults() {
    return {
        {"run.seed", "0"},
        {"run.serial", "false"},
        {"dataset.n", "500"},
        {"dataset.a-site", "Ca,Sr,Ba"},
        {"dataset.b-site", "Ti,Zr,Hf"},
        {"dataset.x-site", "O,S,Se"},
        {"dataset.lattice-lo", "3.8"},
        {"dataset.lattice-hi", "4.4"},
        {"dataset.jitter-sigma", "0.02"},
        {"shape.L", "8"},
        {"shape.filter", ""},
        {"model.base-channels", "32"},
        {"model.channel-multipliers", "1,2,4"},
        {"model.blocks-per-resolution", "3"},
        {"model.attention-resolutions", "1,3,9"},
        {"model.attention-head-dim", "16"},
        {"model.dropout", "0.1"},
        {"model.time-embed-dim", "0"},
        {"train.learning-rate", "1e-4"},
        {"train.beta1", "0.9"},
        {"train.beta2", "0.99"},
        {"train.adam-eps", "1e-8"},
        {"train.ema-decay", "0.9999"},
        {"train.weight-decay", "0.0"},
        {"train.batch-size", "32"},
        {"train.steps", "1000"},
        {"train.log-every", "100"},
        {"diffusion.T", "1000"},
        {"diffusion.log-snr-min", "-20"},
        {"diffusion.log-snr-max", "20"},
        {"diffusion.sample-steps", "256"},
        {"diffusion.omega", "0.0"},
        {"diffusion.variance-interp", "0.1"},
        {"diffusion.cond-dropout", "0.1"},
        {"diffusion.cond", "none"},
        {"augment.shuffle", "true"},
        {"augment.rotate", "true"},
        {"augment.translate", "true"},
        {"relax.max-steps", "2000"},
        {"relax.force-tol", "1e-3"},
        {"relax.energy-tol", "1e-8"},
        {"relax.relax-cell", "true"},
        {"potential.file", ""},
        {"metrics.min-dist", "0.5"},
        {"metrics.min-volume-per-atom", "1.0"},
        {"metrics.delta-struct", "2.0"},
        {"metrics.delta-comp", "0.14"},
        {"hull.threshold", "0.025"},
        {"airss.structures-per-composition", "100"},
        {"airss.volume-factors", "0.4,0.5,0.6,0.7,0.8,0.9,1.0,1.1,1.2"},
        {"airss.min-separation-fraction", "0.7"},
    };
}

std::vector<int> zs_from_symbols(const std::vector<std::string>& symbols) {
    const auto& table = periodic_table::instance();
    std::vector<int> zs;
    zs.reserve(symbols.size());
    for (const auto& s : symbols) zs.push_back(table.by_symbol(s).z);
    return zs;
}

system_shape shape_from(const settings& st) {
    int L = static_cast<int>(st.get_int("shape.L"));
    auto filter = st.get_list("shape.filter");
    if (filter.empty()) return system_shape::full(L);
    return system_shape::reduced(L, zs_from_symbols(filter));
}

model_config model_from(const settings& st, int cond_channels) {
    model_config m;
    m.base_channels = static_cast<int>(st.get_int("model.base-channels"));
    m.channel_multipliers.clear();
    for (const auto& v : st.get_list("model.channel-multipliers"))
        m.channel_multipliers.push_back(std::stoi(v));
    m.blocks_per_resolution = static_cast<int>(st.get_int("model.blocks-per-resolution"));
    m.attention_resolutions.clear();
    for (const auto& v : st.get_list("model.attention-resolutions"))
        m.attention_resolutions.push_back(std::stoi(v));
    m.attention_head_dim = static_cast<int>(st.get_int("model.attention-head-dim"));
    m.dropout = st.get_double("model.dropout");
    m.time_embed_dim = static_cast<int>(st.get_int("model.time-embed-dim"));
    m.cond_channels = cond_channels;
    m.aux_channels = 0;
    return m;
}

train_config train_from(const settings& st) {
    train_config t;
    t.learning_rate = st.get_double("train.learning-rate");
    t.beta1 = st.get_double("train.beta1");
    t.beta2 = st.get_double("train.beta2");
    t.adam_eps = st.get_double("train.adam-eps");
    t.ema_decay = st.get_double("train.ema-decay");
    t.weight_decay = st.get_double("train.weight-decay");
    t.batch_size = static_cast<int>(st.get_int("train.batch-size"));
    t.steps = st.get_int("train.steps");
    t.seed = static_cast<std::uint64_t>(st.get_int("run.seed"));
    return t;
}

diffusion_config diffusion_from(const settings& st) {
    diffusion_config d;
    d.schedule = noise_schedule::cosine(static_cast<int>(st.get_int("diffusion.T")),
                                        st.get_double("diffusion.log-snr-min"),
                                        st.get_double("diffusion.log-snr-max"));
    d.sample_steps = static_cast<int>(st.get_int("diffusion.sample-steps"));
    d.guidance_omega = st.get_double("diffusion.omega");
    d.variance_interp = st.get_double("diffusion.variance-interp");
    d.cond_dropout = st.get_double("diffusion.cond-dropout");
    return d;
}

augment_config augment_from(const settings& st) {
    augment_config a;
    a.shuffle = st.get_bool("augment.shuffle");
    a.rotate = st.get_bool("augment.rotate");
    a.translate = st.get_bool("augment.translate");
    a.seed = static_cast<std::uint64_t>(st.get_int("run.seed"));
    return a;
}

std::optional<composition_cond::kind> cond_mode_from(const settings& st) {
    const std::string& mode = st.get("diffusion.cond");
    if (mode == "none") return std::nullopt;
    if (mode == "types") return composition_cond::kind::types;
    if (mode == "exact") return composition_cond::kind::exact;
    throw config_error("diffusion.cond must be none, types, or exact");
}

relax_options relax_from(const settings& st) {
    relax_options r;
    r.max_steps = static_cast<int>(st.get_int("relax.max-steps"));
    r.force_tol = st.get_double("relax.force-tol");
    r.energy_tol = st.get_double("relax.energy-tol");
    r.relax_cell = st.get_bool("relax.relax-cell");
    return r;
}

pair_potential_params potential_from(const settings& st) {
    const std::string& file = st.get("potential.file");
    if (file.empty()) return pair_potential_params::defaults();
    return pair_potential_params::from_file(file);
}

airss_config airss_from(const settings& st) {
    airss_config a;
    a.structures_per_composition =
        static_cast<int>(st.get_int("airss.structures-per-composition"));
    a.volume_factors.clear();
    for (const auto& v : st.get_list("airss.volume-factors"))
        a.volume_factors.push_back(std::stod(v));
    a.min_separation_fraction = st.get_double("airss.min-separation-fraction");
    a.seed = static_cast<std::uint64_t>(st.get_int("run.seed"));
    return a;
}

proxy_options proxy_from(const settings& st) {
    proxy_options p;
    p.validity.min_dist = st.get_double("metrics.min-dist");
    p.validity.min_volume_per_atom = st.get_double("metrics.min-volume-per-atom");
    p.cov.delta_struct = st.get_double("metrics.delta-struct");
    p.cov.delta_comp = st.get_double("metrics.delta-comp");
    return p;
}

run_config run_config_from(const settings& st) {
    run_config rc;
    rc.cond_mode = cond_mode_from(st);
    rc.model = model_from(st, rc.cond_mode ? 1 : 0);
    rc.shape = shape_from(st);
    rc.train = train_from(st);
    rc.diffusion = diffusion_from(st);
    rc.augment = augment_from(st);
    return rc;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open for writing: " + path);
    f << content;
    if (!f) throw io_error("write failed: " + path);
}

// Every verb lands its artifacts plus the resolved-config echo in one
// directory.
std::string prepare_run_dir(const settings& st, const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io_error("cannot create run directory " + dir + ": " + ec.message());
    write_text((fs::path(dir) / "config.ini").string(), st.echo());
    return dir;
}

std::string padded_id(const char* prefix, int index, int total) {
    int width = 3;
    for (int v = total - 1; v >= 1000; v /= 10) ++width;
    std::ostringstream ss;
    ss << prefix << std::setw(width) << std::setfill('0') << index;
    return ss.str();
}

std::uint64_t run_seed(const settings& st) {
    return static_cast<std::uint64_t>(st.get_int("run.seed"));
}

// ---- per-structure relaxation results (JSON-lines) ----

struct result_record {
    std::string id;
    std::string formula;  // canonical composition key
    double e_total = 0, e_f = 0, max_force = 0;
    bool converged = false;
    int steps = 0;
};

std::string result_to_json(const result_record& r) {
    nlohmann::json j{{"id", r.id},           {"formula", r.formula}, {"e_total", r.e_total},
                     {"e_f", r.e_f},         {"steps", r.steps},     {"max_force", r.max_force},
                     {"converged", r.converged}};
    return j.dump();
}

result_record result_from_json(const std::string& line, int line_no) {
    try {
        nlohmann::json j = nlohmann::json::parse(line);
        result_record r;
        r.id = j.at("id").get<std::string>();
        r.formula = j.at("formula").get<std::string>();
        r.e_total = j.at("e_total").get<double>();
        r.e_f = j.at("e_f").get<double>();
        r.steps = j.at("steps").get<int>();
        r.max_force = j.at("max_force").get<double>();
        r.converged = j.at("converged").get<bool>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("bad result record: ") + e.what(), line_no);
    }
}

std::vector<result_record> read_results(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("cannot open: " + path);
    std::vector<result_record> out;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        out.push_back(result_from_json(line, line_no));
    }
    return out;
}

void write_results(const std::vector<result_record>& rs, const std::string& path) {
    std::string text;
    for (const auto& r : rs) text += result_to_json(r) + "\n";
    write_text(path, text);
}

energy_set set_from_results(const std::string& name, const std::vector<result_record>& rs) {
    std::vector<energy_item> items;
    for (const auto& r : rs)
        if (r.converged) items.push_back({r.formula, r.e_f, r.id});
    return make_energy_set(name, std::move(items));
}

// ---- verbs ----

void cmd_gen_corpus(const settings& st, int n, const std::string& out) {
    perovskite_spec spec;
    spec.a_site = zs_from_symbols(st.get_list("dataset.a-site"));
    spec.b_site = zs_from_symbols(st.get_list("dataset.b-site"));
    spec.x_site = zs_from_symbols(st.get_list("dataset.x-site"));
    spec.lattice_range = {st.get_double("dataset.lattice-lo"), st.get_double("dataset.lattice-hi")};
    spec.jitter_sigma = st.get_double("dataset.jitter-sigma");
    auto records = generate_perovskites(spec, n, run_seed(st));
    prepare_run_dir(st, out);
    write_corpus(records, (fs::path(out) / "corpus.jsonl").string());
    log_line(log_level::info, "gen_corpus_done",
             {{"n", std::to_string(records.size())}, {"out", out}});
}

std::string tensor_to_json(const std::string& id, const unimat_tensor& t) {
    nlohmann::json j;
    j["id"] = id;
    j["values"] = t.values;
    j["cell"] = t.cell_params;
    return j.dump();
}

void cmd_encode(const settings& st, const std::string& corpus, const std::string& out) {
    system_shape shape = shape_from(st);
    auto records = read_corpus(corpus);
    std::string text;
    for (const auto& rec : records) text += tensor_to_json(rec.id, encode(rec.structure, shape)) + "\n";
    prepare_run_dir(st, out);
    write_text((fs::path(out) / "tensors.jsonl").string(), text);
    log_line(log_level::info, "encode_done",
             {{"n", std::to_string(records.size())}, {"out", out}});
}

void cmd_decode(const settings& st, const std::string& tensors, const std::string& out) {
    system_shape shape = shape_from(st);
    std::ifstream f(tensors);
    if (!f) throw io_error("cannot open: " + tensors);
    std::vector<structure_record> records;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            unimat_tensor t(shape);
            auto values = j.at("values").get<std::vector<double>>();
            if (values.size() != t.values.size())
                throw schema_error("tensor value count does not match shape");
            t.values = std::move(values);
            auto cell = j.at("cell").get<std::vector<double>>();
            if (cell.size() != 6) throw schema_error("cell must have 6 parameters");
            std::copy(cell.begin(), cell.end(), t.cell_params.begin());
            structure_record rec;
            rec.id = j.at("id").get<std::string>();
            rec.structure = decode(t);
            records.push_back(std::move(rec));
        } catch (const nlohmann::json::exception& e) {
            throw parse_error(std::string("bad tensor record: ") + e.what(), line_no);
        }
    }
    prepare_run_dir(st, out);
    write_corpus(records, (fs::path(out) / "corpus.jsonl").string());
    log_line(log_level::info, "decode_done",
             {{"n", std::to_string(records.size())}, {"out", out}});
}

void cmd_train(const settings& st, const std::string& corpus, const std::string& resume,
               const std::string& out) {
    run_config rc = run_config_from(st);
    auto records = read_corpus(corpus);
    prepare_run_dir(st, out);

    std::string loss_csv = "step,loss\n";
    train_callbacks cb;
    cb.log_every = st.get_int("train.log-every");
    cb.on_log = [&](std::int64_t step, double loss) {
        log_line(log_level::info, "train_step",
                 {{"step", std::to_string(step)}, {"loss", format_double(loss)}});
        loss_csv += std::to_string(step) + "," + format_double(loss) + "\n";
    };
    checkpoint_data ck = train(records, rc, resume, cb);
    save_checkpoint(ck, (fs::path(out) / "model.ckpt").string());
    write_text((fs::path(out) / "loss.csv").string(), loss_csv);
    log_line(log_level::info, "train_done",
             {{"steps", std::to_string(ck.step)}, {"out", out}});
}

void cmd_sample(const settings& st, const std::string& ckpt_path, int n,
                const std::string& formula, int mode_flag, bool use_ema, const CLI::Option* omega_opt,
                double omega_flag, const CLI::Option* steps_opt, int steps_flag,
                const std::string& out) {
    checkpoint_data ck = load_checkpoint(ckpt_path);
    run_config rc;
    unet model = model_from_checkpoint(ck, use_ema, &rc);

    diffusion_config dcfg = rc.diffusion;
    if (omega_opt->count() > 0) dcfg.guidance_omega = omega_flag;
    if (steps_opt->count() > 0) dcfg.sample_steps = steps_flag;

    composition_cond cond;
    const composition_cond* cond_ptr = nullptr;
    if (!formula.empty()) {
        if (!rc.cond_mode)
            throw config_error("checkpoint was trained unconditionally; --formula not usable");
        composition_cond::kind mode = *rc.cond_mode;
        if (mode_flag == 1) mode = composition_cond::kind::types;
        if (mode_flag == 2) mode = composition_cond::kind::exact;
        cond = make_condition(formula, mode, rc.shape);
        cond_ptr = &cond;
    } else if (rc.cond_mode) {
        throw config_error("checkpoint is composition-conditioned; pass --formula");
    }

    auto tensors = sample(model.as_predictor(), cond_ptr, dcfg, rc.shape, n,
                          derive_seed(run_seed(st), {hash_tag("sample")}));

    prepare_run_dir(st, out);
    std::string manifest;
    std::vector<structure_record> decoded;
    int n_undecodable = 0;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        std::string id = padded_id("sample_", static_cast<int>(i), n);
        nlohmann::json j{{"id", id}};
        try {
            crystal x = decode(tensors[i]);
            std::string file = id + ".cif";
            write_text((fs::path(out) / file).string(), emit_cif(x, id));
            j["file"] = file;
            j["decodable"] = true;
            j["formula"] = x.natoms() > 0 ? composition_key(x) : "";
            j["natoms"] = x.natoms();
            decoded.push_back({id, std::move(x), {}});
        } catch (const invalid_cell&) {
            ++n_undecodable;
            j["file"] = nullptr;
            j["decodable"] = false;
        }
        manifest += j.dump() + "\n";
    }
    write_text((fs::path(out) / "manifest.jsonl").string(), manifest);
    write_corpus(decoded, (fs::path(out) / "samples.jsonl").string());
    nlohmann::json summary{{"n", n},
                           {"n_decodable", static_cast<int>(decoded.size())},
                           {"n_undecodable", n_undecodable},
                           {"omega", dcfg.guidance_omega},
                           {"sample_steps", dcfg.sample_steps}};
    write_text((fs::path(out) / "summary.json").string(), summary.dump(2) + "\n");
    log_line(log_level::info, "sample_done",
             {{"n", std::to_string(n)},
              {"n_undecodable", std::to_string(n_undecodable)},
              {"out", out}});
}

std::vector<crystal> crystals_of(const std::vector<structure_record>& records) {
    std::vector<crystal> xs;
    xs.reserve(records.size());
    for (const auto& r : records) xs.push_back(r.structure);
    return xs;
}

void cmd_eval_proxy(const settings& st, const std::string& generated, int n_undecodable,
                    const std::string& reference, const std::string& out) {
    soft_sphere_oracle oracle(potential_from(st));
    proxy_report rep = proxy_evaluate(crystals_of(read_corpus(generated)), n_undecodable,
                                      crystals_of(read_corpus(reference)), oracle, proxy_from(st));
    report_inputs in;
    in.proxy = &rep;
    eval_report report = assemble_report(in);
    prepare_run_dir(st, out);
    write_text((fs::path(out) / "report.json").string(), report.report_json);
    log_line(log_level::info, "eval_proxy_done",
             {{"structural", format_double(rep.structural_validity_rate)},
              {"composition", format_double(rep.composition_validity_rate)},
              {"cov_r", format_double(rep.cov.cov_r)},
              {"out", out}});
}

void cmd_eval_stability(const settings& st, const std::string& generated,
                        const std::string& entries_path, const std::string& out) {
    soft_sphere_oracle oracle(potential_from(st));
    relax_options opts = relax_from(st);
    auto records = read_corpus(generated);
    auto entries = read_phase_entries(entries_path);
    phase_diagram pd = phase_diagram::build(std::move(entries));

    std::vector<result_record> results;
    std::vector<structure_record> relaxed;
    std::vector<phase_entry> queries;
    for (const auto& rec : records) {
        result_record r;
        r.id = rec.id;
        try {
            relaxation_result res = relax(rec.structure, oracle, opts);
            r.formula = composition_key(res.relaxed);
            r.e_total = res.e_total;
            r.e_f = res.e_f;
            r.converged = res.converged;
            r.steps = res.steps;
            r.max_force = res.max_force;
            structure_record out_rec{rec.id, res.relaxed, {}};
            out_rec.tags["e_f"] = format_double(res.e_f);
            out_rec.tags["converged"] = res.converged ? "true" : "false";
            relaxed.push_back(std::move(out_rec));
            if (res.converged) queries.push_back(entry_of(res.relaxed, res.e_f, rec.id));
        } catch (const error& e) {
            log_line(log_level::warn, "relax_failed", {{"id", rec.id}, {"reason", e.what()}});
            r.converged = false;
        }
        results.push_back(std::move(r));
    }

    stability_count sc = count_stable(pd, queries, st.get_double("hull.threshold"));

    prepare_run_dir(st, out);
    write_results(results, (fs::path(out) / "results.jsonl").string());
    write_corpus(relaxed, (fs::path(out) / "relaxed.jsonl").string());
    std::string ed_lines;
    for (const auto& f : sc.flags) {
        nlohmann::json j{{"id", f.id},
                         {"e_d", f.e_d},
                         {"stable", f.stable},
                         {"metastable", f.metastable}};
        ed_lines += j.dump() + "\n";
    }
    write_text((fs::path(out) / "ed.jsonl").string(), ed_lines);

    report_inputs in;
    in.stability = &sc;
    eval_report report = assemble_report(in);
    write_text((fs::path(out) / "report.json").string(), report.report_json);
    if (!report.ed_histogram_csv.empty())
        write_text((fs::path(out) / "ed_histogram.csv").string(), report.ed_histogram_csv);
    log_line(log_level::info, "eval_stability_done",
             {{"n", std::to_string(records.size())},
              {"n_converged_queries", std::to_string(sc.flags.size())},
              {"n_stable", std::to_string(sc.n_stable)},
              {"n_metastable", std::to_string(sc.n_metastable)},
              {"out", out}});
}

void cmd_compare_ef(const settings& st, const std::string& file_a, const std::string& file_b,
                    const std::string& name_a, const std::string& name_b, const std::string& out) {
    energy_set a = set_from_results(name_a, read_results(file_a));
    energy_set b = set_from_results(name_b, read_results(file_b));
    report_inputs in;
    in.set_a = &a;
    in.set_b = &b;
    eval_report report = assemble_report(in);
    prepare_run_dir(st, out);
    write_text((fs::path(out) / "report.json").string(), report.report_json);
    write_text((fs::path(out) / "delta_ef.csv").string(), report.delta_ef_csv);
    delta_ef_result d = delta_ef(a, b);
    log_line(log_level::info, "compare_ef_done",
             {{"matched", std::to_string(d.matched)},
              {"delta_ef", d.defined ? format_double(d.value) : "undefined"},
              {"out", out}});
}

void cmd_airss_run(const settings& st, const std::string& compositions_path,
                   const std::string& out) {
    airss_config cfg = airss_from(st);
    pair_potential_params params = potential_from(st);

    std::ifstream f(compositions_path);
    if (!f) throw io_error("cannot open: " + compositions_path);
    std::vector<std::string> formulas;
    std::string line;
    while (std::getline(f, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
            line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        formulas.push_back(line.substr(start));
    }
    if (formulas.empty()) throw empty_input("no compositions in " + compositions_path);

    prepare_run_dir(st, out);
    std::vector<airss_record> records;
    std::string record_lines;
    std::vector<structure_record> best_structs;
    std::vector<result_record> best_results;
    for (const auto& formula : formulas) {
        auto comp = parse_formula(formula);
        std::string key = composition_key(comp);
        airss_record rec = airss_run(comp, cfg, params);
        records.push_back(rec);
        nlohmann::json j{{"formula", key},
                         {"n_attempted", rec.n_attempted},
                         {"n_placement_failed", rec.n_placement_failed},
                         {"n_converged", rec.n_converged},
                         {"converged", rec.converged},
                         {"best_e_f", rec.best ? nlohmann::json(rec.best->e_f)
                                               : nlohmann::json(nullptr)}};
        record_lines += j.dump() + "\n";
        if (rec.best) {
            structure_record sr{key, rec.best->relaxed, {}};
            sr.tags["e_f"] = format_double(rec.best->e_f);
            best_structs.push_back(std::move(sr));
            best_results.push_back({key, key, rec.best->e_total, rec.best->e_f,
                                    rec.best->max_force, true, rec.best->steps});
        }
        log_line(log_level::info, "airss_composition",
                 {{"formula", key},
                  {"n_converged", std::to_string(rec.n_converged)},
                  {"n_placement_failed", std::to_string(rec.n_placement_failed)}});
    }
    airss_summary s = summarize(records);
    write_text((fs::path(out) / "airss.jsonl").string(), record_lines);
    write_corpus(best_structs, (fs::path(out) / "best.jsonl").string());
    write_results(best_results, (fs::path(out) / "results.jsonl").string());
    nlohmann::json summary{{"n_compositions", s.n_compositions},
                           {"n_converged_compositions", s.n_converged_compositions},
                           {"composition_rate", s.composition_rate},
                           {"attempt_rate", s.attempt_rate}};
    write_text((fs::path(out) / "summary.json").string(), summary.dump(2) + "\n");
    log_line(log_level::info, "airss_done",
             {{"compositions", std::to_string(s.n_compositions)},
              {"composition_rate", format_double(s.composition_rate)},
              {"out", out}});
}

void cmd_hull_build(const settings& st, const std::string& entries_path, const std::string& out) {
    auto entries = read_phase_entries(entries_path);
    int n_input = static_cast<int>(entries.size());
    phase_diagram pd = phase_diagram::build(std::move(entries));
    std::vector<phase_entry> stable;
    for (std::size_t idx : pd.stable_entries()) stable.push_back(pd.entries()[idx]);
    prepare_run_dir(st, out);
    write_phase_entries(stable, (fs::path(out) / "stable.jsonl").string());
    nlohmann::json summary{{"n_input", n_input},
                           {"n_entries", static_cast<int>(pd.entries().size())},
                           {"n_elements", static_cast<int>(pd.basis().size())},
                           {"n_stable", static_cast<int>(stable.size())}};
    write_text((fs::path(out) / "summary.json").string(), summary.dump(2) + "\n");
    log_line(log_level::info, "hull_build_done",
             {{"n_stable", std::to_string(stable.size())}, {"out", out}});
}

void cmd_hull_ed(const settings& st, const std::string& entries_path, const std::string& queries_path,
                 const std::string& out) {
    phase_diagram pd = phase_diagram::build(read_phase_entries(entries_path));
    auto queries = read_phase_entries(queries_path);
    std::string lines;
    for (const auto& q : queries) {
        auto [ed, terms] = pd.decomposition_energy(q);
        nlohmann::json decomp = nlohmann::json::array();
        for (const auto& t : terms) decomp.push_back({{"id", t.id}, {"weight", t.weight}});
        nlohmann::json j{{"id", q.id}, {"e_d", ed}, {"decomposition", decomp}};
        lines += j.dump() + "\n";
    }
    prepare_run_dir(st, out);
    write_text((fs::path(out) / "ed.jsonl").string(), lines);
    log_line(log_level::info, "hull_ed_done",
             {{"n_queries", std::to_string(queries.size())}, {"out", out}});
}

void cmd_report(const settings& st, const std::string& generated, int n_undecodable,
                const std::string& reference, const std::string& results_path,
                const std::string& entries_path, const std::string& file_a,
                const std::string& file_b, const std::string& name_a, const std::string& name_b,
                const std::string& out) {
    report_inputs in;

    proxy_report rep;
    if (!generated.empty() && !reference.empty()) {
        soft_sphere_oracle oracle(potential_from(st));
        rep = proxy_evaluate(crystals_of(read_corpus(generated)), n_undecodable,
                             crystals_of(read_corpus(reference)), oracle, proxy_from(st));
        in.proxy = &rep;
    }

    stability_count sc;
    if (!results_path.empty() && !entries_path.empty()) {
        phase_diagram pd = phase_diagram::build(read_phase_entries(entries_path));
        std::vector<phase_entry> queries;
        for (const auto& r : read_results(results_path))
            if (r.converged) {
                phase_entry e;
                e.composition = parse_formula(r.formula);
                e.e_f = r.e_f;
                e.id = r.id;
                queries.push_back(std::move(e));
            }
        sc = count_stable(pd, queries, st.get_double("hull.threshold"));
        in.stability = &sc;
    }

    energy_set a, b;
    if (!file_a.empty() && !file_b.empty()) {
        a = set_from_results(name_a, read_results(file_a));
        b = set_from_results(name_b, read_results(file_b));
        in.set_a = &a;
        in.set_b = &b;
    }

    eval_report report = assemble_report(in);
    prepare_run_dir(st, out);
    write_text((fs::path(out) / "report.json").string(), report.report_json);
    if (!report.ed_histogram_csv.empty())
        write_text((fs::path(out) / "ed_histogram.csv").string(), report.ed_histogram_csv);
    if (!report.delta_ef_csv.empty())
        write_text((fs::path(out) / "delta_ef.csv").string(), report.delta_ef_csv);
    log_line(log_level::info, "report_done", {{"out", out}});
}

void cmd_eval_calibrate(const settings& st, const std::string& corpus, double jitter_sigma,
                        const std::string& out) {
    auto records = read_corpus(corpus);
    if (records.empty()) throw empty_input("empty corpus");
    rng r(derive_seed(run_seed(st), {hash_tag("calibrate")}));

    std::vector<fingerprint> fps;
    fps.reserve(records.size());
    for (const auto& rec : records) fps.push_back(fingerprint_of(rec.structure));

    // Structure threshold: jittered copies should stay out of coverage range,
    // the identity case inside; suggest half the median jitter distance.
    std::vector<double> jitter_dist;
    for (const auto& rec : records) {
        crystal x = rec.structure;
        for (auto& s : x.sites)
            for (int k = 0; k < 3; ++k) s.frac[k] = wrap_frac(s.frac[k] + jitter_sigma * r.gaussian());
        jitter_dist.push_back(structure_distance(fingerprint_of(x), fps[&rec - records.data()]));
    }
    std::sort(jitter_dist.begin(), jitter_dist.end());
    double median = jitter_dist[jitter_dist.size() / 2];

    // Composition threshold: half the smallest nonzero cross-corpus distance.
    double min_comp = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < fps.size(); ++i)
        for (std::size_t j = i + 1; j < fps.size(); ++j) {
            double d = composition_distance(fps[i], fps[j]);
            if (d > 1e-12) min_comp = std::min(min_comp, d);
        }

    nlohmann::json cal{{"n", static_cast<int>(records.size())},
                       {"jitter_sigma", jitter_sigma},
                       {"jitter_struct_min", jitter_dist.front()},
                       {"jitter_struct_median", median},
                       {"jitter_struct_max", jitter_dist.back()},
                       {"min_nonzero_comp_distance",
                        std::isfinite(min_comp) ? nlohmann::json(min_comp) : nlohmann::json(nullptr)},
                       {"suggested_delta_struct", 0.5 * median},
                       {"suggested_delta_comp",
                        std::isfinite(min_comp) ? nlohmann::json(0.5 * min_comp) : nlohmann::json(nullptr)}};
    prepare_run_dir(st, out);
    write_text((fs::path(out) / "calibration.json").string(), cal.dump(2) + "\n");
    log_line(log_level::info, "calibrate_done",
             {{"delta_struct", format_double(0.5 * median)},
              {"delta_comp", std::isfinite(min_comp) ? format_double(0.5 * min_comp) : "undefined"},
              {"out", out}});
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"unimat: desk-scale generative materials pipeline"};
    app.require_subcommand(1);

    std::string config_file, log_file, log_level_name = "info";
    std::vector<std::string> overrides;
    long long seed_flag = 0;
    bool serial = false;
    app.add_option("--config", config_file, "INI config file");
    app.add_option("--set", overrides, "override a config key (section.key=value)");
    auto* seed_opt = app.add_option("--seed", seed_flag, "global random seed");
    app.add_flag("--serial", serial, "serial kernels for bit-reproducible runs");
    app.add_option("--log-level", log_level_name, "debug|info|warn|error");
    app.add_option("--log-file", log_file, "mirror log lines to a file");

    // gen-corpus
    auto* gen = app.add_subcommand("gen-corpus", "synthesize a jittered perovskite corpus");
    int gen_n = -1;
    std::string gen_out = "run-gen-corpus";
    auto* gen_n_opt = gen->add_option("--n", gen_n, "number of structures");
    gen->add_option("-o,--out", gen_out, "run directory");

    // encode / decode
    auto* enc = app.add_subcommand("encode", "crystals to periodic-table tensors");
    std::string enc_corpus, enc_out = "run-encode";
    enc->add_option("--corpus", enc_corpus, "corpus JSON-lines")->required();
    enc->add_option("-o,--out", enc_out, "run directory");

    auto* dec = app.add_subcommand("decode", "periodic-table tensors to crystals");
    std::string dec_tensors, dec_out = "run-decode";
    dec->add_option("--tensors", dec_tensors, "tensors JSON-lines")->required();
    dec->add_option("-o,--out", dec_out, "run directory");

    // train
    auto* trn = app.add_subcommand("train", "train the diffusion denoiser");
    std::string trn_corpus, trn_resume, trn_out = "run-train";
    long long trn_steps = -1;
    trn->add_option("--corpus", trn_corpus, "training corpus JSON-lines")->required();
    trn->add_option("--resume", trn_resume, "checkpoint to resume from");
    auto* trn_steps_opt = trn->add_option("--steps", trn_steps, "training steps");
    trn->add_option("-o,--out", trn_out, "run directory");

    // sample
    auto* smp = app.add_subcommand("sample", "draw samples from a checkpoint");
    std::string smp_ckpt, smp_formula, smp_out = "run-sample";
    int smp_n = 16, smp_steps = 0;
    double smp_omega = 0.0;
    bool smp_exact = false, smp_types = false, smp_raw = false;
    smp->add_option("--ckpt", smp_ckpt, "checkpoint file")->required();
    smp->add_option("--n", smp_n, "number of samples");
    smp->add_option("--formula", smp_formula, "conditioning composition");
    smp->add_flag("--exact", smp_exact, "exact per-slot conditioning");
    smp->add_flag("--types", smp_types, "element-types conditioning");
    auto* smp_omega_opt = smp->add_option("--omega", smp_omega, "guidance weight");
    auto* smp_steps_opt = smp->add_option("--steps", smp_steps, "sampling steps");
    smp->add_flag("--raw-params", smp_raw, "sample with raw instead of EMA weights");
    smp->add_option("-o,--out", smp_out, "run directory");

    // eval proxy | stability | calibrate
    auto* eval = app.add_subcommand("eval", "evaluation suites");
    eval->require_subcommand(1);
    auto* evp = eval->add_subcommand("proxy", "validity, coverage, property distances");
    std::string evp_gen, evp_ref, evp_out = "run-eval-proxy";
    int evp_undecodable = 0;
    evp->add_option("--generated", evp_gen, "generated corpus JSON-lines")->required();
    evp->add_option("--n-undecodable", evp_undecodable, "undecodable sample count");
    evp->add_option("--reference", evp_ref, "reference corpus JSON-lines")->required();
    evp->add_option("-o,--out", evp_out, "run directory");

    auto* evs = eval->add_subcommand("stability", "relax, formation energies, hull counts");
    std::string evs_gen, evs_entries, evs_out = "run-eval-stability";
    evs->add_option("--generated", evs_gen, "generated corpus JSON-lines")->required();
    evs->add_option("--entries", evs_entries, "reference phase entries JSON-lines")->required();
    evs->add_option("-o,--out", evs_out, "run directory");

    auto* evc = eval->add_subcommand("calibrate", "suggest coverage thresholds from a corpus");
    std::string evc_corpus, evc_out = "run-eval-calibrate";
    double evc_jitter = 0.10;
    evc->add_option("--corpus", evc_corpus, "corpus JSON-lines")->required();
    evc->add_option("--jitter", evc_jitter, "fractional-coordinate jitter sigma");
    evc->add_option("-o,--out", evc_out, "run directory");

    // compare ef
    auto* cmp = app.add_subcommand("compare", "set comparisons");
    cmp->require_subcommand(1);
    auto* cef = cmp->add_subcommand("ef", "per-composition formation-energy comparison");
    std::string cef_a, cef_b, cef_name_a = "A", cef_name_b = "B", cef_out = "run-compare-ef";
    cef->add_option("--set-a", cef_a, "results JSON-lines for set A")->required();
    cef->add_option("--set-b", cef_b, "results JSON-lines for set B")->required();
    cef->add_option("--name-a", cef_name_a, "label for set A");
    cef->add_option("--name-b", cef_name_b, "label for set B");
    cef->add_option("-o,--out", cef_out, "run directory");

    // airss run
    auto* air = app.add_subcommand("airss", "random structure search baseline");
    air->require_subcommand(1);
    auto* arun = air->add_subcommand("run", "search each composition");
    std::string arun_comps, arun_out = "run-airss";
    arun->add_option("--compositions", arun_comps, "text file, one formula per line")->required();
    arun->add_option("-o,--out", arun_out, "run directory");

    // hull build | ed
    auto* hul = app.add_subcommand("hull", "convex-hull phase diagram");
    hul->require_subcommand(1);
    auto* hb = hul->add_subcommand("build", "build and report stable entries");
    std::string hb_entries, hb_out = "run-hull-build";
    hb->add_option("--entries", hb_entries, "phase entries JSON-lines")->required();
    hb->add_option("-o,--out", hb_out, "run directory");
    auto* hed = hul->add_subcommand("ed", "decomposition energies for queries");
    std::string hed_entries, hed_queries, hed_out = "run-hull-ed";
    hed->add_option("--entries", hed_entries, "phase entries JSON-lines")->required();
    hed->add_option("--queries", hed_queries, "query entries JSON-lines")->required();
    hed->add_option("-o,--out", hed_out, "run directory");

    // report
    auto* rep = app.add_subcommand("report", "assemble an evaluation report");
    std::string rep_gen, rep_ref, rep_results, rep_entries, rep_a, rep_b;
    std::string rep_name_a = "A", rep_name_b = "B", rep_out = "run-report";
    int rep_undecodable = 0;
    rep->add_option("--generated", rep_gen, "generated corpus JSON-lines");
    rep->add_option("--n-undecodable", rep_undecodable, "undecodable sample count");
    rep->add_option("--reference", rep_ref, "reference corpus JSON-lines");
    rep->add_option("--results", rep_results, "relaxation results JSON-lines");
    rep->add_option("--entries", rep_entries, "reference phase entries JSON-lines");
    rep->add_option("--set-a", rep_a, "results JSON-lines for set A");
    rep->add_option("--set-b", rep_b, "results JSON-lines for set B");
    rep->add_option("--name-a", rep_name_a, "label for set A");
    rep->add_option("--name-b", rep_name_b, "label for set B");
    rep->add_option("-o,--out", rep_out, "run directory");

    // Global flags are accepted after the verb as well.
    for (CLI::App* sub : {gen, enc, dec, trn, smp, eval, evp, evs, evc, cmp, cef, air, arun,
                          hul, hb, hed, rep})
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (log_level_name == "debug") set_log_level(log_level::debug);
        else if (log_level_name == "info") set_log_level(log_level::info);
        else if (log_level_name == "warn") set_log_level(log_level::warn);
        else if (log_level_name == "error") set_log_level(log_level::error);
        else throw config_error("unknown log level: " + log_level_name);
        if (!log_file.empty()) set_log_file(log_file);

        settings st(schema_defaults());
        if (!config_file.empty()) st.load_file(config_file);
        st.load_env();
        for (const auto& kv : overrides) {
            auto eq = kv.find('=');
            if (eq == std::string::npos) throw config_error("--set expects section.key=value");
            st.set_flag(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (seed_opt->count() > 0) st.set_flag("run.seed", std::to_string(seed_flag));
        if (serial) st.set_flag("run.serial", "true");
        kernels::parallel_enabled() = !st.get_bool("run.serial");

        if (gen->parsed()) {
            if (gen_n_opt->count() > 0) st.set_flag("dataset.n", std::to_string(gen_n));
            cmd_gen_corpus(st, static_cast<int>(st.get_int("dataset.n")), gen_out);
        } else if (enc->parsed()) {
            cmd_encode(st, enc_corpus, enc_out);
        } else if (dec->parsed()) {
            cmd_decode(st, dec_tensors, dec_out);
        } else if (trn->parsed()) {
            if (trn_steps_opt->count() > 0) st.set_flag("train.steps", std::to_string(trn_steps));
            cmd_train(st, trn_corpus, trn_resume, trn_out);
        } else if (smp->parsed()) {
            if (smp_exact && smp_types) throw config_error("--exact and --types are exclusive");
            int mode_flag = smp_exact ? 2 : (smp_types ? 1 : 0);
            cmd_sample(st, smp_ckpt, smp_n, smp_formula, mode_flag, !smp_raw, smp_omega_opt,
                       smp_omega, smp_steps_opt, smp_steps, smp_out);
        } else if (evp->parsed()) {
            cmd_eval_proxy(st, evp_gen, evp_undecodable, evp_ref, evp_out);
        } else if (evs->parsed()) {
            cmd_eval_stability(st, evs_gen, evs_entries, evs_out);
        } else if (evc->parsed()) {
            cmd_eval_calibrate(st, evc_corpus, evc_jitter, evc_out);
        } else if (cef->parsed()) {
            cmd_compare_ef(st, cef_a, cef_b, cef_name_a, cef_name_b, cef_out);
        } else if (arun->parsed()) {
            cmd_airss_run(st, arun_comps, arun_out);
        } else if (hb->parsed()) {
            cmd_hull_build(st, hb_entries, hb_out);
        } else if (hed->parsed()) {
            cmd_hull_ed(st, hed_entries, hed_queries, hed_out);
        } else if (rep->parsed()) {
            cmd_report(st, rep_gen, rep_undecodable, rep_ref, rep_results, rep_entries, rep_a,
                       rep_b, rep_name_a, rep_name_b, rep_out);
        } else {
            throw config_error("no verb selected");
        }
    } catch (const config_error& e) {
        log_line(log_level::error, "usage_error", {{"reason", e.what()}});
        return 1;
    } catch (const error& e) {
        log_line(log_level::error, "data_error", {{"reason", e.what()}});
        return 2;
    } catch (const std::exception& e) {
        log_line(log_level::error, "unexpected_error", {{"reason", e.what()}});
        return 2;
    }
    return 0;
}
