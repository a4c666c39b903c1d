#include <CLI11.hpp>
#include <cstdio>
#include <exception>

#include "dsmc/errors.hpp"
#include "dsmc/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Decentralized safe multi-agent control: training, evaluation, "
               "and solver verification"};
  app.require_subcommand(1);

  dsmc::RunOptions opt;
  for (CLI::App* sub :
       {app.add_subcommand("train", "train a value model on a task"),
        app.add_subcommand("eval", "roll out a model and dump trajectories"),
        app.add_subcommand("solve-check",
                           "compare the decentralized solver to the reference"),
        app.add_subcommand("grad-check",
                           "compare backward gradients to finite differences"),
        app.add_subcommand("bench", "report problem sizes and one timed run")}) {
    sub->add_option("--config", opt.config, "task configuration JSON");
    sub->add_option("--task", opt.task_name,
                    "built-in task name when no config is given");
    sub->add_option("--seed", opt.seed, "master random seed");
    sub->add_option("--out-dir", opt.out_dir, "output directory");
    sub->add_option("--checkpoint", opt.checkpoint,
                    "model checkpoint to load (eval, or training warm start)");
    sub->add_option("--max-iters", opt.max_iters,
                    "training iterations / solve-check instance count");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "train") dsmc::run_train(opt);
    else if (cmd == "eval") dsmc::run_eval(opt);
    else if (cmd == "solve-check") dsmc::run_solvecheck(opt);
    else if (cmd == "grad-check") dsmc::run_gradcheck(opt);
    else dsmc::run_bench(opt);
  } catch (const dsmc::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
