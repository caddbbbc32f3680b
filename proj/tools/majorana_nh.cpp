#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mnh/commands.hpp"

namespace {

struct Flags {
    std::string config_path;
    std::string preset;
    std::string out;
    int threads = 0;
    std::optional<std::uint64_t> seed;
    std::string scale;
};

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw mnh::ConfigError("config: cannot read '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

mnh::RunConfig resolve(mnh::Command cmd, const Flags& f) {
    const std::string text = f.config_path.empty() ? std::string() : read_text(f.config_path);
    mnh::RunConfig rc;
    if (cmd == mnh::Command::reproduce) {
        std::string id = f.preset;
        if (id.empty() && !text.empty()) {
            const auto probe = YAML::Load(text);
            if (probe.IsMap() && probe["preset"]) id = probe["preset"].as<std::string>();
        }
        if (id.empty()) throw mnh::ConfigError("reproduce: give --preset or a config with a 'preset' key");
        rc = mnh::figure_preset(id).config;
        mnh::apply_preset_overrides(text, rc);
    } else {
        rc = mnh::parse_config(text);
        rc.command = cmd;
    }
    // Precedence: command-line flag, then environment, then config file.
    if (f.threads > 0) rc.threads = static_cast<unsigned>(f.threads);
    else if (const char* env = std::getenv("MNH_THREADS"); env && std::atoi(env) > 0)
        rc.threads = static_cast<unsigned>(std::atoi(env));
    if (!f.out.empty()) rc.output.dir = f.out;
    else if (const char* env = std::getenv("MNH_OUT"); env && *env) rc.output.dir = env;
    if (f.seed) rc.seed = *f.seed;
    if (f.scale == "raw") rc.model.energy_scale = mnh::EnergyScale::raw;
    if (f.scale == "half") rc.model.energy_scale = mnh::EnergyScale::half;
    return rc;
}

int execute(mnh::Command cmd, const Flags& f) {
    try {
        const auto rc = resolve(cmd, f);
        const auto result = mnh::run(rc);
        const auto files = mnh::write_output(result, rc.output.dir, rc.resolved_prefix(), rc.output.formats);
        std::cout << result.summary.dump(2) << "\n";
        for (const auto& p : files) std::cerr << "wrote " << p.string() << "\n";
        return 0;
    } catch (const mnh::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const mnh::ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const YAML::Exception& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 2;
    } catch (const mnh::ConvergenceError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Majorana spectra, exceptional points and skin effect in non-Hermitian Yao-Lee models"};
    app.require_subcommand(1);
    Flags flags;
    std::string scale;
    std::uint64_t seed = 0;

    const std::vector<std::pair<mnh::Command, const char*>> commands{
        {mnh::Command::bloch_spectrum, "Bloch eigenvalues on a momentum grid"},
        {mnh::Command::ep_find, "Exceptional points: closed form and numerical scan"},
        {mnh::Command::arc_trace, "Fermi-arc polylines joining exceptional points"},
        {mnh::Command::skin_check, "Skin-effect criterion per flavour"},
        {mnh::Command::ribbon_sweep, "Zigzag ribbon spectra with localization classes"},
        {mnh::Command::localization, "Right-eigenvector site weights at chosen k_x"},
        {mnh::Command::reproduce, "Run a figure preset"},
    };
    std::vector<std::pair<CLI::App*, mnh::Command>> subs;
    for (const auto& [cmd, help] : commands) {
        auto* sub = app.add_subcommand(std::string(mnh::to_string(cmd)), help);
        sub->add_option("--config", flags.config_path, "YAML run configuration")->check(CLI::ExistingFile);
        sub->add_option("--out", flags.out, "Output directory (env MNH_OUT)");
        sub->add_option("--threads", flags.threads, "Worker threads (env MNH_THREADS)")->check(CLI::PositiveNumber);
        sub->add_option("--seed", seed, "Seed for random momenta");
        sub->add_option("--scale", flags.scale, "Reported energy scale")->check(CLI::IsMember({"raw", "half"}));
        if (cmd == mnh::Command::reproduce)
            sub->add_option("--preset", flags.preset, "Preset id")->check(CLI::IsMember(mnh::preset_ids()));
        subs.emplace_back(sub, cmd);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    for (const auto& [sub, cmd] : subs) {
        if (!sub->parsed()) continue;
        if (sub->count("--seed")) flags.seed = seed;
        return execute(cmd, flags);
    }
    return 2;
}
