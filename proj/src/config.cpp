#include "xing/config.hpp"

#include <fstream>
#include <cstdio>
#include <sstream>

namespace xing {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

long parse_long(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        long out = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': not an integer: '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        unsigned long long out = std::stoull(v, &pos);
        if (pos != v.size() || v[0] == '-') throw std::invalid_argument("trailing");
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': not an unsigned integer: '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': not a number: '" + v + "'");
    }
}

int parse_int(const std::string& key, const std::string& v) {
    long out = parse_long(key, v);
    if (out < -2147483647L || out > 2147483647L)
        throw ConfigError("config key '" + key + "': out of range: '" + v + "'");
    return static_cast<int>(out);
}

// Shortest decimal form that parses back to the same double.
std::string fmt_double(double v) {
    char buf[64];
    for (int prec = 6; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::stod(buf) == v) break;
    }
    return buf;
}

}  // namespace

void TrainConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
    if (t_blocks < 1) fail("T must be >= 1");
    if (n_images < 1) fail("N must be >= 1");
    if (channels < 4 || channels % 4 != 0) fail("c must be a positive multiple of 4");
    if (image_h < 4 || image_h % 4 != 0) fail("H must be a positive multiple of 4");
    if (image_w < 4 || image_w % 4 != 0) fail("W must be a positive multiple of 4");
    if (!(lambda_gan >= 0 && lambda_l1 >= 0 && lambda_p >= 0)) fail("loss weights must be >= 0");
    if (!(lr > 0)) fail("lr must be > 0");
    if (!(beta1 >= 0 && beta1 < 1)) fail("beta1 must be in [0,1)");
    if (!(beta2 >= 0 && beta2 < 1)) fail("beta2 must be in [0,1)");
    if (iterations < 0) fail("iterations must be >= 0");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (eval_every < 1) fail("eval_every must be >= 1");
    if (checkpoint_every < 1) fail("checkpoint_every must be >= 1");
    if (eval_samples < 1) fail("eval_samples must be >= 1");
    if (train_pairs < 1) fail("train_pairs must be >= 1");
    if (!(sigma > 0)) fail("sigma must be > 0");
    if (iteration < 0) fail("iteration must be >= 0");
}

TrainConfig parse_config(const std::string& text) {
    TrainConfig cfg;
    std::istringstream is(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        std::string line = raw;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected key=value, got '" + trim(raw) + "'");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");

        if (key == "variant") {
            try {
                cfg.variant = parse_variant(val);
            } catch (const std::exception& e) {
                throw ConfigError(std::string("config key 'variant': ") + e.what());
            }
        } else if (key == "T") {
            cfg.t_blocks = parse_int(key, val);
        } else if (key == "N") {
            cfg.n_images = parse_int(key, val);
        } else if (key == "c") {
            cfg.channels = parse_int(key, val);
        } else if (key == "H") {
            cfg.image_h = parse_int(key, val);
        } else if (key == "W") {
            cfg.image_w = parse_int(key, val);
        } else if (key == "lambda_gan") {
            cfg.lambda_gan = parse_double(key, val);
        } else if (key == "lambda_l1") {
            cfg.lambda_l1 = parse_double(key, val);
        } else if (key == "lambda_p") {
            cfg.lambda_p = parse_double(key, val);
        } else if (key == "lr") {
            cfg.lr = parse_double(key, val);
        } else if (key == "beta1") {
            cfg.beta1 = parse_double(key, val);
        } else if (key == "beta2") {
            cfg.beta2 = parse_double(key, val);
        } else if (key == "iterations") {
            cfg.iterations = parse_long(key, val);
        } else if (key == "batch_size") {
            cfg.batch_size = parse_int(key, val);
        } else if (key == "master_seed") {
            cfg.master_seed = parse_u64(key, val);
        } else if (key == "eval_every") {
            cfg.eval_every = parse_long(key, val);
        } else if (key == "checkpoint_every") {
            cfg.checkpoint_every = parse_long(key, val);
        } else if (key == "eval_samples") {
            cfg.eval_samples = parse_int(key, val);
        } else if (key == "train_pairs") {
            cfg.train_pairs = parse_int(key, val);
        } else if (key == "sigma") {
            cfg.sigma = parse_double(key, val);
        } else if (key == "gan_combine") {
            if (val == "average")
                cfg.gan_sum = false;
            else if (val == "sum")
                cfg.gan_sum = true;
            else
                throw ConfigError("config key 'gan_combine': expected average or sum, got '" +
                                  val + "'");
        } else if (key == "iteration") {
            cfg.iteration = parse_long(key, val);
        } else {
            throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key +
                              "'");
        }
    }
    cfg.validate();
    return cfg;
}

TrainConfig load_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const TrainConfig& cfg) {
    std::ostringstream os;
    os << "variant=" << variant_name(cfg.variant) << '\n';
    os << "T=" << cfg.t_blocks << '\n';
    os << "N=" << cfg.n_images << '\n';
    os << "c=" << cfg.channels << '\n';
    os << "H=" << cfg.image_h << '\n';
    os << "W=" << cfg.image_w << '\n';
    os << "lambda_gan=" << fmt_double(cfg.lambda_gan) << '\n';
    os << "lambda_l1=" << fmt_double(cfg.lambda_l1) << '\n';
    os << "lambda_p=" << fmt_double(cfg.lambda_p) << '\n';
    os << "lr=" << fmt_double(cfg.lr) << '\n';
    os << "beta1=" << fmt_double(cfg.beta1) << '\n';
    os << "beta2=" << fmt_double(cfg.beta2) << '\n';
    os << "iterations=" << cfg.iterations << '\n';
    os << "batch_size=" << cfg.batch_size << '\n';
    os << "master_seed=" << cfg.master_seed << '\n';
    os << "eval_every=" << cfg.eval_every << '\n';
    os << "checkpoint_every=" << cfg.checkpoint_every << '\n';
    os << "eval_samples=" << cfg.eval_samples << '\n';
    os << "train_pairs=" << cfg.train_pairs << '\n';
    os << "sigma=" << fmt_double(cfg.sigma) << '\n';
    os << "gan_combine=" << (cfg.gan_sum ? "sum" : "average") << '\n';
    os << "iteration=" << cfg.iteration << '\n';
    return os.str();
}

}  // namespace xing
