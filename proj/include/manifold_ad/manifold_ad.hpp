// Umbrella header.
#ifndef MANIFOLD_AD_MANIFOLD_AD_HPP
#define MANIFOLD_AD_MANIFOLD_AD_HPP

#include "manifold_ad/autoencoder.hpp"
#include "manifold_ad/bench.hpp"
#include "manifold_ad/csv.hpp"
#include "manifold_ad/datagen.hpp"
#include "manifold_ad/dataset.hpp"
#include "manifold_ad/detect.hpp"
#include "manifold_ad/lmgp.hpp"
#include "manifold_ad/manifold.hpp"

#endif  // MANIFOLD_AD_MANIFOLD_AD_HPP
