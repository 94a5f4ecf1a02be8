#include "fpdn/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace fpdn {

namespace {

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("not a boolean: '" + v + "'");
}

int parse_int(const std::string& v) {
    size_t used = 0;
    const int x = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument("not an integer: '" + v + "'");
    return x;
}

uint64_t parse_u64(const std::string& v) {
    size_t used = 0;
    const uint64_t x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument("not an unsigned integer: '" + v + "'");
    return x;
}

double parse_real(const std::string& v) {
    size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("not a number: '" + v + "'");
    return x;
}

struct Entry {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

std::string bool_str(bool b) { return b ? "true" : "false"; }

std::string real_str(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

const std::map<std::string, Entry>& table() {
    static const std::map<std::string, Entry> entries = [] {
        std::map<std::string, Entry> t;
        auto add_bool = [&t](const std::string& key, auto member) {
            t[key] = {[member](RunConfig& c, const std::string& v) { c.*member = parse_bool(v); },
                      [member](const RunConfig& c) { return bool_str(c.*member); }};
        };
        auto add = [&t](const std::string& key, auto getter, auto setter) {
            t[key] = {setter, getter};
        };

        // model
        add("model.depth",
            [](const RunConfig& c) { return std::to_string(c.model.depth); },
            [](RunConfig& c, const std::string& v) { c.model.depth = parse_int(v); });
        add("model.base_channels",
            [](const RunConfig& c) { return std::to_string(c.model.base_channels); },
            [](RunConfig& c, const std::string& v) { c.model.base_channels = parse_int(v); });
        add("model.in_channels",
            [](const RunConfig& c) { return std::to_string(c.model.in_channels); },
            [](RunConfig& c, const std::string& v) { c.model.in_channels = parse_int(v); });
        add("model.out_channels",
            [](const RunConfig& c) { return std::to_string(c.model.out_channels); },
            [](RunConfig& c, const std::string& v) { c.model.out_channels = parse_int(v); });
        add("model.output_activation",
            [](const RunConfig& c) {
                return c.model.output_activation == UNetConfig::Activation::Sigmoid ? "sigmoid"
                                                                                    : "linear";
            },
            [](RunConfig& c, const std::string& v) {
                if (v == "sigmoid") c.model.output_activation = UNetConfig::Activation::Sigmoid;
                else if (v == "linear") c.model.output_activation = UNetConfig::Activation::Linear;
                else throw std::invalid_argument("output_activation must be sigmoid or linear");
            });

        // train
        add("train.lr_init", [](const RunConfig& c) { return real_str(c.train.lr_init); },
            [](RunConfig& c, const std::string& v) { c.train.lr_init = parse_real(v); });
        add("train.plateau_factor",
            [](const RunConfig& c) { return real_str(c.train.plateau_factor); },
            [](RunConfig& c, const std::string& v) { c.train.plateau_factor = parse_real(v); });
        add("train.plateau_patience",
            [](const RunConfig& c) { return std::to_string(c.train.plateau_patience); },
            [](RunConfig& c, const std::string& v) { c.train.plateau_patience = parse_int(v); });
        add("train.stop_patience",
            [](const RunConfig& c) { return std::to_string(c.train.stop_patience); },
            [](RunConfig& c, const std::string& v) { c.train.stop_patience = parse_int(v); });
        add("train.batch_size",
            [](const RunConfig& c) { return std::to_string(c.train.batch_size); },
            [](RunConfig& c, const std::string& v) { c.train.batch_size = parse_int(v); });
        add("train.max_epochs",
            [](const RunConfig& c) { return std::to_string(c.train.max_epochs); },
            [](RunConfig& c, const std::string& v) { c.train.max_epochs = parse_int(v); });
        add("train.val_fraction",
            [](const RunConfig& c) { return real_str(c.train.val_fraction); },
            [](RunConfig& c, const std::string& v) { c.train.val_fraction = parse_real(v); });
        add("train.seed", [](const RunConfig& c) { return std::to_string(c.train.seed); },
            [](RunConfig& c, const std::string& v) { c.train.seed = parse_u64(v); });
        add("train.adam_beta1", [](const RunConfig& c) { return real_str(c.train.adam_beta1); },
            [](RunConfig& c, const std::string& v) { c.train.adam_beta1 = parse_real(v); });
        add("train.adam_beta2", [](const RunConfig& c) { return real_str(c.train.adam_beta2); },
            [](RunConfig& c, const std::string& v) { c.train.adam_beta2 = parse_real(v); });
        add("train.adam_eps", [](const RunConfig& c) { return real_str(c.train.adam_eps); },
            [](RunConfig& c, const std::string& v) { c.train.adam_eps = parse_real(v); });
        add("train.min_improvement_delta",
            [](const RunConfig& c) { return real_str(c.train.min_improvement_delta); },
            [](RunConfig& c, const std::string& v) {
                c.train.min_improvement_delta = parse_real(v);
            });

        // degradation operators
        auto add_real = [&t](const std::string& key, auto member) {
            t[key] = {[member](RunConfig& c, const std::string& v) { c.*member = parse_real(v); },
                      [member](const RunConfig& c) { return real_str(c.*member); }};
        };
        auto add_int = [&t](const std::string& key, auto member) {
            t[key] = {[member](RunConfig& c, const std::string& v) { c.*member = parse_int(v); },
                      [member](const RunConfig& c) { return std::to_string(c.*member); }};
        };
        (void)add_bool;
        (void)add_real;
        (void)add_int;

        auto dg = [](RunConfig& c) -> DegradationConfig& { return c.degrade; };
        auto add_dg_bool = [&t, dg](const std::string& key, bool DegradationConfig::* member) {
            t["degrade." + key] = {
                [dg, member](RunConfig& c, const std::string& v) { dg(c).*member = parse_bool(v); },
                [member](const RunConfig& c) { return bool_str(c.degrade.*member); }};
        };
        auto add_dg_real = [&t, dg](const std::string& key, double DegradationConfig::* member) {
            t["degrade." + key] = {
                [dg, member](RunConfig& c, const std::string& v) { dg(c).*member = parse_real(v); },
                [member](const RunConfig& c) { return real_str(c.degrade.*member); }};
        };
        auto add_dg_int = [&t, dg](const std::string& key, int DegradationConfig::* member) {
            t["degrade." + key] = {
                [dg, member](RunConfig& c, const std::string& v) { dg(c).*member = parse_int(v); },
                [member](const RunConfig& c) { return std::to_string(c.degrade.*member); }};
        };

        add_dg_bool("rotation", &DegradationConfig::rotation);
        add_dg_real("rotation_probability", &DegradationConfig::rotation_probability);
        add_dg_real("rotation_max_deg", &DegradationConfig::rotation_max_deg);
        add_dg_bool("elastic", &DegradationConfig::elastic);
        add_dg_real("elastic_probability", &DegradationConfig::elastic_probability);
        add_dg_real("elastic_alpha_min", &DegradationConfig::elastic_alpha_min);
        add_dg_real("elastic_alpha_max", &DegradationConfig::elastic_alpha_max);
        add_dg_real("elastic_sigma_min", &DegradationConfig::elastic_sigma_min);
        add_dg_real("elastic_sigma_max", &DegradationConfig::elastic_sigma_max);
        add_dg_bool("resolution", &DegradationConfig::resolution);
        add_dg_real("resolution_probability", &DegradationConfig::resolution_probability);
        add_dg_real("resolution_factor_min", &DegradationConfig::resolution_factor_min);
        add_dg_real("resolution_factor_max", &DegradationConfig::resolution_factor_max);
        add_dg_bool("blur", &DegradationConfig::blur);
        add_dg_real("blur_probability", &DegradationConfig::blur_probability);
        add_dg_real("blur_sigma_min", &DegradationConfig::blur_sigma_min);
        add_dg_real("blur_sigma_max", &DegradationConfig::blur_sigma_max);
        add_dg_bool("brightness", &DegradationConfig::brightness);
        add_dg_real("brightness_probability", &DegradationConfig::brightness_probability);
        add_dg_real("brightness_max", &DegradationConfig::brightness_max);
        add_dg_bool("contrast", &DegradationConfig::contrast);
        add_dg_real("contrast_probability", &DegradationConfig::contrast_probability);
        add_dg_real("contrast_min", &DegradationConfig::contrast_min);
        add_dg_real("contrast_max", &DegradationConfig::contrast_max);
        add_dg_bool("background", &DegradationConfig::background);
        add_dg_real("background_probability", &DegradationConfig::background_probability);
        add_dg_real("background_alpha_min", &DegradationConfig::background_alpha_min);
        add_dg_real("background_alpha_max", &DegradationConfig::background_alpha_max);
        add_dg_bool("occlusion", &DegradationConfig::occlusion);
        add_dg_real("occlusion_probability", &DegradationConfig::occlusion_probability);
        add_dg_int("occlusion_count_min", &DegradationConfig::occlusion_count_min);
        add_dg_int("occlusion_count_max", &DegradationConfig::occlusion_count_max);
        add_dg_real("occlusion_size_min", &DegradationConfig::occlusion_size_min);
        add_dg_real("occlusion_size_max", &DegradationConfig::occlusion_size_max);
        add_dg_bool("scratch", &DegradationConfig::scratch);
        add_dg_real("scratch_probability", &DegradationConfig::scratch_probability);
        add_dg_int("scratch_count_min", &DegradationConfig::scratch_count_min);
        add_dg_int("scratch_count_max", &DegradationConfig::scratch_count_max);
        add_dg_real("scratch_length_min", &DegradationConfig::scratch_length_min);
        add_dg_real("scratch_length_max", &DegradationConfig::scratch_length_max);
        add_dg_real("scratch_width_min", &DegradationConfig::scratch_width_min);
        add_dg_real("scratch_width_max", &DegradationConfig::scratch_width_max);

        // ridge generator
        add("ridge.period_min",
            [](const RunConfig& c) { return real_str(c.degrade.ridge.period_min); },
            [](RunConfig& c, const std::string& v) { c.degrade.ridge.period_min = parse_real(v); });
        add("ridge.period_max",
            [](const RunConfig& c) { return real_str(c.degrade.ridge.period_max); },
            [](RunConfig& c, const std::string& v) { c.degrade.ridge.period_max = parse_real(v); });
        add("ridge.iterations",
            [](const RunConfig& c) { return std::to_string(c.degrade.ridge.iterations); },
            [](RunConfig& c, const std::string& v) { c.degrade.ridge.iterations = parse_int(v); });
        add("ridge.margin", [](const RunConfig& c) { return real_str(c.degrade.ridge.margin); },
            [](RunConfig& c, const std::string& v) { c.degrade.ridge.margin = parse_real(v); });

        // augmentation
        auto add_au_bool = [&t](const std::string& key, bool AugmentationSpec::* member) {
            t["augment." + key] = {
                [member](RunConfig& c, const std::string& v) { c.augment.*member = parse_bool(v); },
                [member](const RunConfig& c) { return bool_str(c.augment.*member); }};
        };
        auto add_au_real = [&t](const std::string& key, double AugmentationSpec::* member) {
            t["augment." + key] = {
                [member](RunConfig& c, const std::string& v) { c.augment.*member = parse_real(v); },
                [member](const RunConfig& c) { return real_str(c.augment.*member); }};
        };
        add_au_bool("flip_horizontal", &AugmentationSpec::flip_horizontal);
        add_au_bool("flip_vertical", &AugmentationSpec::flip_vertical);
        add_au_bool("shear", &AugmentationSpec::shear);
        add_au_real("shear_max", &AugmentationSpec::shear_max);
        add_au_bool("translate", &AugmentationSpec::translate);
        add_au_real("translate_max", &AugmentationSpec::translate_max);
        add_au_bool("zoom", &AugmentationSpec::zoom);
        add_au_real("zoom_min", &AugmentationSpec::zoom_min);
        add_au_real("zoom_max", &AugmentationSpec::zoom_max);
        add_au_bool("rotate", &AugmentationSpec::rotate);
        add_au_real("rotate_max_deg", &AugmentationSpec::rotate_max_deg);
        add_au_bool("contrast", &AugmentationSpec::contrast);
        add_au_real("contrast_min", &AugmentationSpec::contrast_min);
        add_au_real("contrast_max", &AugmentationSpec::contrast_max);
        add_au_bool("intensity_gain", &AugmentationSpec::intensity_gain);
        add_au_real("intensity_gain_min", &AugmentationSpec::intensity_gain_min);
        add_au_real("intensity_gain_max", &AugmentationSpec::intensity_gain_max);

        // pipeline
        t["pipeline.pad_instead_of_resize"] = {
            [](RunConfig& c, const std::string& v) { c.pad_instead_of_resize = parse_bool(v); },
            [](const RunConfig& c) { return bool_str(c.pad_instead_of_resize); }};

        return t;
    }();
    return entries;
}

}  // namespace

void apply_config_value(RunConfig& config, const std::string& key, const std::string& value) {
    const auto& entries = table();
    auto it = entries.find(key);
    if (it == entries.end()) throw std::invalid_argument("unknown config key: '" + key + "'");
    try {
        it->second.set(config, value);
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument("config key '" + key + "': " + e.what());
    }
}

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

RunConfig load_config_file(const std::string& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                        ": expected 'key = value'");
        try {
            apply_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return base;
}

std::string config_to_text(const RunConfig& config) {
    std::ostringstream out;
    for (const auto& [key, entry] : table()) out << key << " = " << entry.get(config) << "\n";
    return out.str();
}

}  // namespace fpdn
