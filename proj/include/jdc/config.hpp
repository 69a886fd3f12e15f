// Copyright (c) the JDC project authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef JDC_CONFIG_HPP_
#define JDC_CONFIG_HPP_

#include "jdc/common.hpp"

namespace jdc {

// Architecture of the analysis/synthesis transforms. Kernel, stride and
// encoder depth are fixed; the decoder optionally doubles its layer count
// (each upsampling stage gains a stride-1 layer in front of the stride-2 one).
struct CodecConfig {
  int hidden_channels = 32;
  int latent_channels = 48;
  int decoder_layers = 4;  // 4 or 8
  int num_priors = 1;
  int mixture_components = 3;

  static constexpr int kKernel = 5;
  static constexpr int kStride = 2;
  static constexpr int kEncoderLayers = 4;
  static constexpr int kDownsampleFactor = 16;  // 2^4

  void validate() const {
    if (hidden_channels < 1 || latent_channels < 1)
      throw ConfigError("CodecConfig: channel counts must be >= 1");
    if (decoder_layers != 4 && decoder_layers != 8)
      throw ConfigError("CodecConfig: decoder_layers must be 4 or 8");
    if (num_priors < 1) throw ConfigError("CodecConfig: num_priors must be >= 1");
    if (mixture_components < 1)
      throw ConfigError("CodecConfig: mixture_components must be >= 1");
  }
};

}  // namespace jdc

#endif  // JDC_CONFIG_HPP_
