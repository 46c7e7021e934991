// Train NIBH and LSH on 100 random points and compare their distortion and neighbor recall.
#include <iostream>

#include "isohash/isohash.hpp"

int main() {
  using namespace isohash;
  const Dataset data = preprocess(gen_random_dataset(100, 100, 0).points);
  const SecantBatch secants = all_secants(data);

  SolverConfig cfg;
  cfg.seed = 0;
  const TrainResult nibh = train_nibh(data, secants, 30, cfg);
  const HashModel lsh = lsh_model(30, data, 0);

  const auto queries = all_queries(data.size());
  const double d_nibh = max_distortion(nibh.model, data).delta;
  const double d_lsh = max_distortion(lsh, data).delta;
  std::cout << "outer iterations: " << nibh.state.iter << " (" << to_string(nibh.status) << ")\n"
            << "delta  NIBH " << d_nibh << "  LSH " << d_lsh << '\n'
            << "MAP@10 NIBH " << map_at_k(nibh.model, data, queries, 10).map << "  LSH "
            << map_at_k(lsh, data, queries, 10).map << '\n';
  return d_nibh < d_lsh ? 0 : 1;
}
