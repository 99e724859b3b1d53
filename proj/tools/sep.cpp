#include "sep/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

// Flag parsing only; command logic lives in sep/cli.hpp. Precedence:
// built-in defaults < --config file < explicit flags.

namespace {

struct FlagSet {
    std::string config_file;
    std::string tweets, prices, out;
    std::string reduced, summaries, demos, pairs, predictions, weights;
    std::string reward_model, policy_sft, policy_ppo, policy;
    std::string report, backtest_report, sessions, trace, script, journal;
    std::string backend, baseline, filter, stocks, from, to, command;
    std::uint64_t seed = 0;
    int jobs = 0, max_iters = 0, window = 0, n = 0;
    int sft_epochs = 0, reward_epochs = 0, ppo_epochs = 0, ppo_inner_steps = 0;
    double temperature = 0.0, beta = 0.0, clip_eps = 0.0;
    double split_ratio = 0.0, validation_fraction = 0.0;
    double sft_lr = 0.0, reward_lr = 0.0, ppo_lr = 0.0;
};

void add_common_flags(CLI::App* cmd, FlagSet& flags) {
    cmd->add_option("--config", flags.config_file, "JSON config file");
    cmd->add_option("--tweets", flags.tweets, "tweets.jsonl input");
    cmd->add_option("--prices,--truth", flags.prices, "prices.jsonl input");
    cmd->add_option("--out", flags.out, "artifact directory");
    cmd->add_option("--reduced", flags.reduced, "reduced tweets artifact");
    cmd->add_option("--summaries", flags.summaries, "summaries artifact");
    cmd->add_option("--demos", flags.demos, "demonstrations artifact");
    cmd->add_option("--pairs", flags.pairs, "comparison pairs artifact");
    cmd->add_option("--pred,--predictions", flags.predictions, "predictions artifact");
    cmd->add_option("--weights", flags.weights, "portfolio weights artifact");
    cmd->add_option("--reward-model", flags.reward_model, "reward model file");
    cmd->add_option("--policy-sft", flags.policy_sft, "supervised policy file");
    cmd->add_option("--policy-ppo", flags.policy_ppo, "optimized policy file");
    cmd->add_option("--policy", flags.policy, "explicit policy for predict");
    cmd->add_option("--report", flags.report, "metrics report file");
    cmd->add_option("--backtest-report", flags.backtest_report, "backtest report file");
    cmd->add_option("--sessions", flags.sessions, "session journal artifact");
    cmd->add_option("--trace", flags.trace, "training trace artifact");
    cmd->add_option("--script", flags.script, "scripted replies for the mock backend");
    cmd->add_option("--journal", flags.journal, "recorded session to replay");
    cmd->add_option("--backend", flags.backend, "mock or http");
    cmd->add_option("--baseline", flags.baseline, "portfolio baseline: equal or positive");
    cmd->add_option("--seed", flags.seed, "master RNG seed");
    cmd->add_option("--jobs", flags.jobs, "backend in-flight bound (0 = cores)");
    cmd->add_option("--max-iters", flags.max_iters, "reflection iterations per episode");
    cmd->add_option("--window", flags.window, "input window span in days");
    cmd->add_option("--n", flags.n, "candidates per prediction");
    cmd->add_option("--temperature", flags.temperature, "sampling temperature");
    cmd->add_option("--beta", flags.beta, "KL penalty strength");
    cmd->add_option("--clip-eps", flags.clip_eps, "PPO clip range");
    cmd->add_option("--split-ratio", flags.split_ratio, "train fraction of trading days");
    cmd->add_option("--validation-fraction", flags.validation_fraction,
                    "held-out fraction of the train pool");
    cmd->add_option("--sft-epochs", flags.sft_epochs, "supervised epochs");
    cmd->add_option("--sft-lr", flags.sft_lr, "supervised learning rate");
    cmd->add_option("--reward-epochs", flags.reward_epochs, "reward model epochs");
    cmd->add_option("--reward-lr", flags.reward_lr, "reward model learning rate");
    cmd->add_option("--ppo-epochs", flags.ppo_epochs, "policy optimization epochs");
    cmd->add_option("--ppo-lr", flags.ppo_lr, "policy optimization learning rate");
    cmd->add_option("--ppo-inner-steps", flags.ppo_inner_steps, "surrogate steps per epoch");
    cmd->add_option("--filter", flags.filter, "evaluation filter: all or informative");
    cmd->add_option("--stocks", flags.stocks, "comma-separated ticker allowlist");
    cmd->add_option("--from", flags.from, "inclusive ISO start date");
    cmd->add_option("--to", flags.to, "inclusive ISO end date");
}

// Only flags the user actually passed override the config file.
int apply_flags(const CLI::App* cmd, const FlagSet& flags, sep::RunConfig& config) {
    auto seen = [&](const std::string& name) {
        const CLI::Option* option = cmd->get_option_no_throw(name);
        return option != nullptr && option->count() > 0;
    };
    if (seen("--tweets")) config.tweets = flags.tweets;
    if (seen("--prices")) config.prices = flags.prices;
    if (seen("--out")) config.out = flags.out;
    if (seen("--reduced")) config.reduced = flags.reduced;
    if (seen("--summaries")) config.summaries = flags.summaries;
    if (seen("--demos")) config.demos = flags.demos;
    if (seen("--pairs")) config.pairs = flags.pairs;
    if (seen("--pred")) config.predictions = flags.predictions;
    if (seen("--weights")) config.weights_file = flags.weights;
    if (seen("--reward-model")) config.reward_model = flags.reward_model;
    if (seen("--policy-sft")) config.policy_sft = flags.policy_sft;
    if (seen("--policy-ppo")) config.policy_ppo = flags.policy_ppo;
    if (seen("--policy")) config.policy = flags.policy;
    if (seen("--report")) config.report = flags.report;
    if (seen("--backtest-report")) config.backtest_report = flags.backtest_report;
    if (seen("--sessions")) config.sessions = flags.sessions;
    if (seen("--trace")) config.trace = flags.trace;
    if (seen("--script")) config.script = flags.script;
    if (seen("--journal")) config.journal = flags.journal;
    if (seen("--backend")) config.backend = flags.backend;
    if (seen("--baseline")) config.baseline = flags.baseline;
    if (seen("--command")) config.replay_command = flags.command;
    if (seen("--seed")) {
        config.seed = flags.seed;
        config.train.seed = flags.seed;
        config.sampler.seed = flags.seed;
    }
    if (seen("--jobs")) config.jobs = flags.jobs;
    if (seen("--max-iters")) config.max_iters = flags.max_iters;
    if (seen("--window")) config.window_span = flags.window;
    if (seen("--n")) config.sampler.n = flags.n;
    if (seen("--temperature")) config.sampler.temperature = flags.temperature;
    if (seen("--beta")) config.train.beta = flags.beta;
    if (seen("--clip-eps")) config.train.clip_eps = flags.clip_eps;
    if (seen("--split-ratio")) config.split_ratio = flags.split_ratio;
    if (seen("--validation-fraction")) config.validation_fraction = flags.validation_fraction;
    if (seen("--sft-epochs")) config.train.sft_epochs = flags.sft_epochs;
    if (seen("--sft-lr")) config.train.sft_lr = flags.sft_lr;
    if (seen("--reward-epochs")) config.train.reward_epochs = flags.reward_epochs;
    if (seen("--reward-lr")) config.train.reward_lr = flags.reward_lr;
    if (seen("--ppo-epochs")) config.train.ppo_epochs = flags.ppo_epochs;
    if (seen("--ppo-lr")) config.train.ppo_lr = flags.ppo_lr;
    if (seen("--ppo-inner-steps")) config.train.ppo_inner_steps = flags.ppo_inner_steps;
    if (seen("--filter")) config.filter = flags.filter;
    if (seen("--stocks")) config.stocks = flags.stocks;
    if (seen("--from")) config.from = flags.from;
    if (seen("--to")) config.to = flags.to;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Explainable stock prediction pipeline"};
    app.require_subcommand(1);

    const std::vector<std::string> commands = {
        "cluster", "summarize", "explain",  "train-sft", "train-reward", "train-ppo",
        "predict", "evaluate",  "portfolio", "backtest",  "replay"};

    std::map<std::string, FlagSet> flag_sets;
    std::map<std::string, CLI::App*> subcommands;
    for (const std::string& name : commands) {
        CLI::App* cmd = app.add_subcommand(name);
        add_common_flags(cmd, flag_sets[name]);
        if (name == "replay")
            cmd->add_option("--command", flag_sets[name].command,
                            "subcommand to re-run from the journal");
        subcommands[name] = cmd;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        sep::cli::emit_error(std::cerr, "config", e.what());
        return sep::cli::kConfigExit;
    }

    for (const std::string& name : commands) {
        const CLI::App* cmd = subcommands[name];
        if (!cmd->parsed()) continue;
        const FlagSet& flags = flag_sets[name];

        sep::RunConfig config;
        if (cmd->count("--config") > 0) {
            try {
                config = sep::load_run_config(flags.config_file);
            } catch (const sep::ConfigError& e) {
                sep::cli::emit_error(std::cerr, "config", e.what());
                return sep::cli::kConfigExit;
            }
        }
        apply_flags(cmd, flags, config);
        return sep::cli::run_command(name, std::move(config));
    }
    return sep::cli::kConfigExit;
}
