#ifndef GBMPO_GBMPO_HPP
#define GBMPO_GBMPO_HPP

#include "gbmpo/advantage.hpp"
#include "gbmpo/config.hpp"
#include "gbmpo/divergence.hpp"
#include "gbmpo/es.hpp"
#include "gbmpo/experiment.hpp"
#include "gbmpo/io.hpp"
#include "gbmpo/policy.hpp"
#include "gbmpo/rng.hpp"
#include "gbmpo/simplex.hpp"
#include "gbmpo/tasks.hpp"
#include "gbmpo/trainer.hpp"

#endif  // GBMPO_GBMPO_HPP
