// Umbrella header.
#ifndef BASS_BASS_HPP_
#define BASS_BASS_HPP_

#include "bass/core.hpp"
#include "bass/em.hpp"
#include "bass/fit.hpp"
#include "bass/gibbs.hpp"
#include "bass/gig.hpp"
#include "bass/io.hpp"
#include "bass/metrics.hpp"
#include "bass/model.hpp"
#include "bass/network.hpp"
#include "bass/px_em.hpp"
#include "bass/simulate.hpp"

#endif  // BASS_BASS_HPP_
