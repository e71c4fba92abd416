// scratch probe: RsR convergence variants at d=8
#include <cstdio>
#include "av/dataset.hpp"
#include "av/model.hpp"
using namespace av;
int main() {
  GenConfig cfg; cfg.seed = 1;
  DatasetSplits data = generate_dataset(cfg);
  ModelSpec spec; spec.visual = Backbone::ToyR; spec.audio = Backbone::ToyR;
  spec.fusion = Fusion::Sum; spec.feat_dim = 8;
  for (auto [epochs, lr] : std::vector<std::pair<size_t,double>>{{45,0.08},{60,0.08},{45,0.12},{30,0.15}}) {
    AVModel m = build_model(spec, mix_seed(1, {hash_str("RsR")}));
    TrainResult tr = train_clean(m, data, epochs, lr, 16, mix_seed(42, {hash_str("RsR"), 1ULL}));
    std::printf("RsR e%zu lr%.2f: train %.3f test %.3f\n", epochs, lr, tr.train_acc.back(),
                accuracy(tr.model, data.test));
    std::fflush(stdout);
  }
  return 0;
}
