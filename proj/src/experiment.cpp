// Copyright Contributors to the splatlab Project
// SPDX-License-Identifier: Apache-2.0

#include "splatlab/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "splatlab/common.hpp"
#include "splatlab/metrics.hpp"

namespace splatlab {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string join_key(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

/// Typed field access over one JSON object. Every key touched is remembered;
/// finish() rejects the rest by full path so typos never pass silently.
class Section {
public:
    Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object())
            throw ConfigError("config: " + (path_.empty() ? std::string("the top level") : path_) +
                              " must be a JSON object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return obj_.contains(key);
    }

    double number(const std::string& key, double fallback) {
        if (!has(key)) return fallback;
        const json& v = obj_.at(key);
        if (!v.is_number()) throw ConfigError("config: " + join_key(path_, key) + " must be a number");
        return v.get<double>();
    }

    int integer(const std::string& key, int fallback) {
        if (!has(key)) return fallback;
        const json& v = obj_.at(key);
        if (!v.is_number_integer())
            throw ConfigError("config: " + join_key(path_, key) + " must be an integer");
        return v.get<int>();
    }

    std::uint64_t unsigned_int(const std::string& key, std::uint64_t fallback) {
        if (!has(key)) return fallback;
        const json& v = obj_.at(key);
        if (!v.is_number_integer() ||
            (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
            throw ConfigError("config: " + join_key(path_, key) + " must be a non-negative integer");
        return v.get<std::uint64_t>();
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const json& v = obj_.at(key);
        if (!v.is_boolean()) throw ConfigError("config: " + join_key(path_, key) + " must be a boolean");
        return v.get<bool>();
    }

    std::string text(const std::string& key, const std::string& fallback) {
        if (!has(key)) return fallback;
        const json& v = obj_.at(key);
        if (!v.is_string()) throw ConfigError("config: " + join_key(path_, key) + " must be a string");
        return v.get<std::string>();
    }

    std::vector<int> int_list(const std::string& key, std::vector<int> fallback) {
        if (!has(key)) return fallback;
        const json& v = obj_.at(key);
        if (!v.is_array())
            throw ConfigError("config: " + join_key(path_, key) + " must be an array of integers");
        std::vector<int> out;
        for (const json& e : v) {
            if (!e.is_number_integer())
                throw ConfigError("config: " + join_key(path_, key) + " must be an array of integers");
            out.push_back(e.get<int>());
        }
        return out;
    }

    const json* object_or_null(const std::string& key) {
        if (!has(key)) return nullptr;
        const json& v = obj_.at(key);
        if (!v.is_object())
            throw ConfigError("config: " + join_key(path_, key) + " must be a JSON object");
        return &v;
    }

    void finish() const {
        for (const auto& item : obj_.items())
            if (!seen_.count(item.key()))
                throw ConfigError("config: unknown key '" + join_key(path_, item.key()) + "'");
    }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

void parse_scene(const json& j, const std::string& path, SceneRecipe& r, std::uint64_t& seed) {
    Section s(j, path);
    r.recipe = s.text("recipe", r.recipe);
    seed = s.unsigned_int("seed", seed);
    r.width = s.integer("width", r.width);
    r.height = s.integer("height", r.height);
    r.gaussians = s.integer("gaussians", r.gaussians);
    r.layers = s.integer("layers", r.layers);
    r.views = s.integer("views", r.views);
    r.train_views = s.integer("train_views", r.train_views);
    r.sh_degree = s.integer("sh_degree", r.sh_degree);
    s.finish();
}

void parse_prior(const json& j, const std::string& path, PriorSpec& p) {
    Section s(j, path);
    p.gain = s.number("gain", p.gain);
    p.offset = s.number("offset", p.offset);
    p.noise_rel = s.number("noise_rel", p.noise_rel);
    p.radius = s.integer("radius", p.radius);
    s.finish();
    if (!(p.gain > 0.0)) throw ConfigError("config: prior.gain must be > 0");
    if (!(p.noise_rel >= 0.0)) throw ConfigError("config: prior.noise_rel must be >= 0");
    if (p.radius < 0) throw ConfigError("config: prior.radius must be >= 0");
}

void parse_init(const json& j, const std::string& path, InitSpec& i) {
    Section s(j, path);
    i.mode = s.text("mode", i.mode);
    i.jitter = s.number("jitter", i.jitter);
    i.drop = s.number("drop", i.drop);
    i.keep_colors = s.boolean("keep_colors", i.keep_colors);
    s.finish();
    if (i.mode != "dense" && i.mode != "sparse")
        throw ConfigError("config: init.mode must be \"dense\" or \"sparse\", got \"" + i.mode + "\"");
    if (!(i.jitter >= 0.0)) throw ConfigError("config: init.jitter must be >= 0");
    if (!(i.drop >= 0.0 && i.drop < 1.0)) throw ConfigError("config: init.drop must lie in [0, 1)");
}

void parse_loss(const json& j, const std::string& path, LossConfig& l) {
    Section s(j, path);
    l.scales = s.int_list("scales", l.scales);
    l.w_local = s.number("w_local", l.w_local);
    l.w_global = s.number("w_global", l.w_global);
    l.w_p = s.number("w_p", l.w_p);
    l.w_l2 = s.number("w_l2", l.w_l2);
    l.eps = s.number("eps", l.eps);
    l.lambda_depth = s.number("lambda_depth", l.lambda_depth);
    l.lambda_ssim = s.number("lambda_ssim", l.lambda_ssim);
    std::string mode = s.text("pcc_mode", l.pcc_mode == PccMode::folded ? "folded" : "separate");
    if (mode == "folded")
        l.pcc_mode = PccMode::folded;
    else if (mode == "separate")
        l.pcc_mode = PccMode::separate;
    else
        throw ConfigError("config: loss.pcc_mode must be \"folded\" or \"separate\", got \"" + mode +
                          "\"");
    s.finish();
}

void parse_render(const json& j, const std::string& path, RenderConfig& r) {
    Section s(j, path);
    if (s.has("background")) {
        const json& bg = j.at("background");
        if (!bg.is_array() || bg.size() != 3)
            throw ConfigError("config: " + join_key(path, "background") +
                              " must be an array of 3 numbers");
        for (int c = 0; c < 3; ++c) {
            if (!bg[c].is_number())
                throw ConfigError("config: " + join_key(path, "background") +
                                  " must be an array of 3 numbers");
            r.background[c] = bg[c].get<double>();
        }
    }
    r.normalize_depth = s.boolean("normalize_depth", r.normalize_depth);
    r.eps_d = s.number("eps_d", r.eps_d);
    s.finish();
    if (!(r.eps_d > 0.0)) throw ConfigError("config: render.eps_d must be > 0");
}

void parse_train(const json& j, const std::string& path, TrainConfig& t) {
    Section s(j, path);
    t.iterations = s.integer("iterations", t.iterations);
    t.eval_every = s.integer("eval_every", t.eval_every);
    t.seed = s.unsigned_int("seed", t.seed);
    t.lr_means = s.number("lr_means", t.lr_means);
    t.lr_rotations = s.number("lr_rotations", t.lr_rotations);
    t.lr_scales = s.number("lr_scales", t.lr_scales);
    t.lr_opacities = s.number("lr_opacities", t.lr_opacities);
    t.lr_colors = s.number("lr_colors", t.lr_colors);
    t.beta1 = s.number("beta1", t.beta1);
    t.beta2 = s.number("beta2", t.beta2);
    t.eps_opt = s.number("eps_opt", t.eps_opt);
    t.alpha_mask_threshold = s.number("alpha_mask_threshold", t.alpha_mask_threshold);
    s.finish();
}

void parse_ablation(const json& j, const std::string& path, AblationFlags& a) {
    Section s(j, path);
    a.enable_hd = s.boolean("enable_hd", a.enable_hd);
    a.enable_pc = s.boolean("enable_pc", a.enable_pc);
    s.finish();
}

bool valid_name(const std::string& n) {
    if (n.empty() || n.size() > 64) return false;
    for (char c : n)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.'))
            return false;
    return true;
}

struct VariantParse {
    VariantConfig cfg;
    std::string output_dir = "out";
};

/// Parses one full config object (sweep already stripped) and validates every
/// field before anything runs.
VariantParse parse_variant(const json& root) {
    VariantParse out;
    Section s(root, "");
    int schema = s.integer("schema_version", 1);
    if (schema != 1)
        throw ConfigError("config: schema_version must be 1, got " + std::to_string(schema));
    out.output_dir = s.text("output_dir", out.output_dir);
    out.cfg.name = s.text("name", out.cfg.name);
    if (!valid_name(out.cfg.name))
        throw ConfigError("config: name must be 1-64 characters from [A-Za-z0-9._-], got \"" +
                          out.cfg.name + "\"");
    if (const json* o = s.object_or_null("scene"))
        parse_scene(*o, "scene", out.cfg.scene, out.cfg.scene_seed);
    if (const json* o = s.object_or_null("prior")) parse_prior(*o, "prior", out.cfg.prior);
    if (const json* o = s.object_or_null("init")) parse_init(*o, "init", out.cfg.init);
    if (const json* o = s.object_or_null("train")) parse_train(*o, "train", out.cfg.train);
    if (const json* o = s.object_or_null("loss")) parse_loss(*o, "loss", out.cfg.train.loss);
    if (const json* o = s.object_or_null("render")) parse_render(*o, "render", out.cfg.train.render);
    if (const json* o = s.object_or_null("ablation"))
        parse_ablation(*o, "ablation", out.cfg.ablation);
    s.finish();
    out.cfg.scene.validate();
    out.cfg.train.validate();
    return out;
}

struct ParsedExperiment {
    json base;                // top level minus sweep
    std::vector<json> sweep;  // per-variant override objects
};

ParsedExperiment split_config(const json& root) {
    if (!root.is_object()) throw ConfigError("config: the top level must be a JSON object");
    ParsedExperiment p;
    p.base = root;
    if (root.contains("sweep")) {
        const json& sw = root.at("sweep");
        if (!sw.is_array() || sw.empty())
            throw ConfigError("config: sweep must be a non-empty array of override objects");
        for (const json& e : sw) {
            if (!e.is_object())
                throw ConfigError("config: sweep entries must be JSON objects");
            if (e.contains("sweep"))
                throw ConfigError("config: sweep entries cannot nest another sweep");
            if (e.contains("output_dir"))
                throw ConfigError("config: sweep entries cannot override output_dir");
            if (!e.contains("name"))
                throw ConfigError("config: every sweep entry needs a name");
            p.sweep.push_back(e);
        }
        p.base.erase("sweep");
    }
    return p;
}

// ---- artifact writing ----

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for hashing: " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw IoError("sha256: context allocation failed");
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        EVP_DigestUpdate(ctx, buf, static_cast<size_t>(in.gcount()));
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("short write to " + path.string());
}

std::string report_csv_text(const TrainReport& report) {
    std::ostringstream out;
    out << "iteration,total,l1,dssim,depth,psnr,ssim,depth_pearson\n";
    for (const EvalRow& r : report.rows)
        out << r.iteration << ',' << format_double(r.total) << ',' << format_double(r.l1) << ','
            << format_double(r.dssim) << ',' << format_double(r.depth) << ','
            << format_double(r.psnr) << ',' << format_double(r.ssim) << ','
            << format_double(r.depth_pearson) << '\n';
    return out.str();
}

std::string summary_csv_text(const VariantResult& r) {
    std::ostringstream out;
    out << "name,scene_seed,iterations,psnr,ssim,depth_pearson\n";
    out << csv_escape(r.name) << ',' << r.scene_seed << ',' << r.iterations << ','
        << format_double(r.psnr) << ',' << format_double(r.ssim) << ','
        << format_double(r.depth_pearson) << '\n';
    return out.str();
}

const char* depth_mode_name(DepthMode m) {
    switch (m) {
        case DepthMode::none: return "none";
        case DepthMode::global_pearson: return "global_pearson";
        default: return "hierarchical";
    }
}

json summary_json(const VariantConfig& cfg, const TrainConfig& effective,
                  const SyntheticScene& scene, const VariantResult& r) {
    json j;
    j["schema_version"] = 1;
    j["name"] = r.name;
    j["scene"] = {{"recipe", cfg.scene.recipe},          {"seed", r.scene_seed},
                  {"width", cfg.scene.width},            {"height", cfg.scene.height},
                  {"gaussians", cfg.scene.gaussians},    {"layers", cfg.scene.layers},
                  {"views", cfg.scene.views},            {"train_views", cfg.scene.train_views},
                  {"sh_degree", cfg.scene.sh_degree}};
    j["prior"] = {{"gain", cfg.prior.gain},
                  {"offset", cfg.prior.offset},
                  {"noise_rel", cfg.prior.noise_rel},
                  {"radius", cfg.prior.radius}};
    j["init"] = {{"mode", cfg.init.mode},
                 {"jitter", cfg.init.jitter},
                 {"drop", cfg.init.drop},
                 {"keep_colors", cfg.init.keep_colors}};
    j["ablation"] = {{"enable_hd", cfg.ablation.enable_hd}, {"enable_pc", cfg.ablation.enable_pc}};
    j["train"] = {{"iterations", effective.iterations},
                  {"eval_every", effective.eval_every},
                  {"seed", effective.seed},
                  {"depth_mode", depth_mode_name(effective.depth_mode)}};
    j["loss"] = {{"lambda_depth", effective.loss.lambda_depth},
                 {"lambda_ssim", effective.loss.lambda_ssim},
                 {"w_local", effective.loss.w_local},
                 {"w_global", effective.loss.w_global},
                 {"w_p", effective.loss.w_p},
                 {"w_l2", effective.loss.w_l2},
                 {"scales", effective.loss.scales},
                 {"pcc_mode", effective.loss.pcc_mode == PccMode::folded ? "folded" : "separate"}};
    j["heldout_views"] = scene.heldout_view_ids;
    j["final"] = {{"psnr", r.psnr}, {"ssim", r.ssim}, {"depth_pearson", r.depth_pearson}};
    j["checkpoint"] = "checkpoint.bin";
    return j;
}

/// Hash and size every regular file under dir (sorted relative paths), then
/// write dir/manifest.json; the manifest never lists itself.
void write_manifest(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().filename() != "manifest.json")
            files.push_back(fs::relative(entry.path(), dir));
    std::sort(files.begin(), files.end());
    json j;
    j["schema_version"] = 1;
    j["files"] = json::array();
    for (const fs::path& rel : files) {
        fs::path full = dir / rel;
        j["files"].push_back({{"path", rel.generic_string()},
                              {"bytes", static_cast<std::uint64_t>(fs::file_size(full))},
                              {"sha256", sha256_file(full)}});
    }
    write_text_file(dir / "manifest.json", j.dump(2) + "\n");
}

std::string format_fixed(double v, int digits) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

// ---- compare ----

std::vector<std::vector<std::string>> read_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    i += 2;
                } else {
                    quoted = false;
                    ++i;
                }
            } else {
                field += c;
                ++i;
            }
        } else if (c == '"') {
            quoted = true;
            ++i;
        } else if (c == ',') {
            row.push_back(field);
            field.clear();
            ++i;
        } else if (c == '\r' || c == '\n') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            ++i;
            row.push_back(field);
            field.clear();
            rows.push_back(row);
            row.clear();
        } else {
            field += c;
            ++i;
        }
    }
    if (!field.empty() || !row.empty()) {
        row.push_back(field);
        rows.push_back(row);
    }
    return rows;
}

struct SummaryEntry {
    std::string name;
    std::uint64_t scene_seed = 0;
    double psnr = 0, ssim = 0, depth_pearson = 0;
    std::string source;
};

double parse_number(const std::string& text, const std::string& where) {
    char* end = nullptr;
    double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || end != text.c_str() + text.size())
        throw ConfigError("compare: " + where + " is not a number: \"" + text + "\"");
    return v;
}

SummaryEntry load_summary(const std::string& path) {
    auto rows = read_csv_file(path);
    if (rows.size() < 2)
        throw ConfigError("compare: " + path + " has no data row");
    const auto& header = rows[0];
    auto col = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw ConfigError("compare: " + path + " is missing column '" + name + "'");
        return static_cast<size_t>(it - header.begin());
    };
    size_t c_name = col("name"), c_seed = col("scene_seed"), c_psnr = col("psnr"),
           c_ssim = col("ssim"), c_dp = col("depth_pearson");
    const auto& data = rows[1];
    size_t need = std::max({c_name, c_seed, c_psnr, c_ssim, c_dp});
    if (data.size() <= need) throw ConfigError("compare: " + path + " data row is too short");
    SummaryEntry e;
    e.name = data[c_name];
    e.scene_seed = static_cast<std::uint64_t>(
        parse_number(data[c_seed], path + " column scene_seed"));
    e.psnr = parse_number(data[c_psnr], path + " column psnr");
    e.ssim = parse_number(data[c_ssim], path + " column ssim");
    e.depth_pearson = parse_number(data[c_dp], path + " column depth_pearson");
    e.source = path;
    return e;
}

}  // namespace

void apply_ablation(const AblationFlags& flags, TrainConfig& train) {
    if (flags.enable_hd) {
        train.depth_mode = DepthMode::hierarchical;
        if (!flags.enable_pc) train.loss.w_p = 0.0;
    } else {
        train.depth_mode = flags.enable_pc ? DepthMode::global_pearson : DepthMode::none;
    }
}

std::vector<DepthMap> make_train_priors(const SyntheticScene& scene, const PriorSpec& spec,
                                        std::uint64_t scene_seed) {
    if (!(spec.gain > 0.0)) throw ConfigError("prior gain must be > 0");
    if (!(spec.noise_rel >= 0.0)) throw ConfigError("prior noise_rel must be >= 0");
    if (spec.radius < 0) throw ConfigError("prior radius must be >= 0");
    std::vector<DepthMap> priors;
    priors.reserve(scene.train_view_ids.size());
    for (int vid : scene.train_view_ids) {
        const DepthMap& gt = scene.gt_depths[vid];
        const std::vector<unsigned char>& mask = scene.gt_masks[vid];
        const std::vector<double>& d = gt.values.data();
        double mean = 0.0;
        int n = 0;
        for (size_t p = 0; p < d.size(); ++p)
            if (mask[p]) {
                mean += d[p];
                ++n;
            }
        mean /= n;
        double var = 0.0;
        for (size_t p = 0; p < d.size(); ++p)
            if (mask[p]) var += (d[p] - mean) * (d[p] - mean);
        var /= n;
        PriorModel model;
        model.gain = spec.gain;
        model.offset = spec.offset;
        model.noise_std = spec.noise_rel * std::sqrt(var);
        model.radius = spec.radius;
        priors.push_back(simulate_prior(gt, model, scene_seed * 7919 + static_cast<std::uint64_t>(vid)));
    }
    return priors;
}

VariantResult run_variant(const VariantConfig& cfg, const std::string& dir) {
    cfg.scene.validate();
    cfg.train.validate();
    fs::create_directories(dir);

    SyntheticScene scene = make_scene(cfg.scene, cfg.scene_seed);
    std::vector<DepthMap> priors = make_train_priors(scene, cfg.prior, cfg.scene_seed);
    GaussianCloud cloud =
        cfg.init.mode == "sparse"
            ? sparse_init(scene, cfg.init.jitter, cfg.init.drop, cfg.train.seed)
            : dense_init(scene, cfg.init.jitter, cfg.init.drop, cfg.train.seed, cfg.init.keep_colors);

    TrainConfig effective = cfg.train;
    apply_ablation(cfg.ablation, effective);
    effective.checkpoint_path = (fs::path(dir) / "checkpoint.bin").string();

    TrainReport report = train(scene, cloud, effective, priors);
    write_text_file(fs::path(dir) / "report.csv", report_csv_text(report));

    GaussianCloud frozen = cloud.detach();
    for (int vid : scene.heldout_view_ids) {
        RenderOutput out = render(frozen, scene.cameras[vid], effective.render);
        std::string stem = "heldout_" + std::to_string(vid);
        write_ppm((fs::path(dir) / (stem + ".ppm")).string(), out.color);
        write_pfm((fs::path(dir) / (stem + "_depth.pfm")).string(), out.depth);
    }

    const EvalRow& last = report.rows.back();
    VariantResult res;
    res.name = cfg.name;
    res.scene_seed = cfg.scene_seed;
    res.iterations = effective.iterations;
    res.psnr = last.psnr;
    res.ssim = last.ssim;
    res.depth_pearson = last.depth_pearson;
    res.dir = dir;
    write_text_file(fs::path(dir) / "summary.csv", summary_csv_text(res));
    write_text_file(fs::path(dir) / "summary.json",
                    summary_json(cfg, effective, scene, res).dump(2) + "\n");
    write_manifest(dir);
    return res;
}

std::vector<VariantResult> run_experiment_file(const std::string& config_path,
                                               const RunOverrides& ovr) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw IoError("cannot open config file: " + config_path);
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config: " + config_path + " is not valid JSON: " + e.what());
    }

    ParsedExperiment pe = split_config(root);
    VariantParse base = parse_variant(pe.base);
    std::string out_dir = ovr.out ? *ovr.out : base.output_dir;

    auto apply_overrides = [&](VariantConfig& v) {
        if (ovr.seed) {
            v.scene_seed = *ovr.seed;
            v.train.seed = *ovr.seed;
        }
        if (ovr.iterations) {
            v.train.iterations = *ovr.iterations;
            v.train.validate();
        }
    };

    std::vector<VariantResult> results;
    if (pe.sweep.empty()) {
        VariantConfig v = base.cfg;
        apply_overrides(v);
        results.push_back(run_variant(v, out_dir));
        return results;
    }

    std::set<std::string> names;
    std::vector<VariantConfig> variants;
    for (size_t i = 0; i < pe.sweep.size(); ++i) {
        json merged = pe.base;
        merged.merge_patch(pe.sweep[i]);
        VariantParse vp;
        try {
            vp = parse_variant(merged);
        } catch (const ConfigError& e) {
            throw ConfigError("sweep entry " + std::to_string(i) + ": " + e.what());
        }
        if (!names.insert(vp.cfg.name).second)
            throw ConfigError("config: duplicate sweep variant name '" + vp.cfg.name + "'");
        apply_overrides(vp.cfg);
        variants.push_back(vp.cfg);
    }
    for (const VariantConfig& v : variants)
        results.push_back(run_variant(v, (fs::path(out_dir) / v.name).string()));

    std::ostringstream sweep_csv;
    sweep_csv << "name,scene_seed,iterations,psnr,ssim,depth_pearson\n";
    for (const VariantResult& r : results)
        sweep_csv << csv_escape(r.name) << ',' << r.scene_seed << ',' << r.iterations << ','
                  << format_double(r.psnr) << ',' << format_double(r.ssim) << ','
                  << format_double(r.depth_pearson) << '\n';
    write_text_file(fs::path(out_dir) / "sweep_summary.csv", sweep_csv.str());
    return results;
}

std::string compare_summaries(const std::vector<std::string>& csv_paths,
                              const std::string& out_csv) {
    if (csv_paths.size() < 2)
        throw ConfigError("compare: need at least two summary files, got " +
                          std::to_string(csv_paths.size()));
    std::vector<SummaryEntry> entries;
    for (const std::string& p : csv_paths) entries.push_back(load_summary(p));
    for (size_t i = 1; i < entries.size(); ++i)
        if (entries[i].scene_seed != entries[0].scene_seed)
            throw ConfigError("compare: scene seed mismatch: " + entries[0].source + " has " +
                              std::to_string(entries[0].scene_seed) + " but " + entries[i].source +
                              " has " + std::to_string(entries[i].scene_seed));

    auto rank_key = [](double v) {
        return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
    };
    std::stable_sort(entries.begin(), entries.end(),
                     [&](const SummaryEntry& a, const SummaryEntry& b) {
                         if (rank_key(a.psnr) != rank_key(b.psnr))
                             return rank_key(a.psnr) > rank_key(b.psnr);
                         return rank_key(a.ssim) > rank_key(b.ssim);
                     });

    std::vector<std::array<std::string, 5>> cells;
    cells.push_back({"rank", "name", "psnr", "ssim", "depth_pearson"});
    for (size_t i = 0; i < entries.size(); ++i)
        cells.push_back({std::to_string(i + 1), entries[i].name, format_fixed(entries[i].psnr, 4),
                         format_fixed(entries[i].ssim, 4),
                         format_fixed(entries[i].depth_pearson, 4)});
    std::array<size_t, 5> widths{};
    for (const auto& row : cells)
        for (int c = 0; c < 5; ++c) widths[c] = std::max(widths[c], row[c].size());
    std::ostringstream text;
    for (const auto& row : cells) {
        for (int c = 0; c < 5; ++c) {
            text << row[c] << std::string(widths[c] - row[c].size(), ' ');
            text << (c == 4 ? "" : "  ");
        }
        text << '\n';
    }

    if (!out_csv.empty()) {
        std::ostringstream csv;
        csv << "rank,name,scene_seed,psnr,ssim,depth_pearson,source\n";
        for (size_t i = 0; i < entries.size(); ++i)
            csv << (i + 1) << ',' << csv_escape(entries[i].name) << ',' << entries[i].scene_seed
                << ',' << format_double(entries[i].psnr) << ',' << format_double(entries[i].ssim)
                << ',' << format_double(entries[i].depth_pearson) << ','
                << csv_escape(entries[i].source) << '\n';
        write_text_file(out_csv, csv.str());
    }
    return text.str();
}

}  // namespace splatlab
