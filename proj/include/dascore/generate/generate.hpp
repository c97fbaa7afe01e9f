// Copyright 2026 The dascore Authors. All Rights Reserved.
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

#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>

#include "dascore/backend/client.hpp"
#include "dascore/backend/protocol.hpp"
#include "dascore/core/image.hpp"
#include "dascore/core/types.hpp"

namespace dascore::generate {

using backend::AttentionTarget;
using backend::GenerationRequest;
using backend::WeightedSubPrompt;

struct GenerationResult {
  ImageRef image;
  std::map<std::string, std::string> backend_metadata;
};

/// Pairs every sub-prompt with its prompt weight and every subject token
/// with its attention gain. The backend applies both; the engine only
/// carries them.
inline GenerationRequest build_request(const Prompt& prompt, const Decomposition& decomposition,
                                       const WeightState& state, const GenerationDefaults& defaults,
                                       Mode mode) {
  require(state.size() == decomposition.size() && state.attention_gains.size() == decomposition.size(),
          "weight state length must match the decomposition");
  validate(state);
  GenerationRequest request;
  request.prompt = prompt.text();
  request.defaults = defaults;
  request.mode = mode;
  for (std::size_t i = 0; i < decomposition.size(); ++i) {
    const auto& a = decomposition.assertions[i];
    request.sub_prompts.push_back({a.sub_prompt, state.prompt_weights[i]});
    request.attention_targets.push_back({a.subject_token, state.attention_gains[i]});
  }
  validate(request);
  return request;
}

class Generator {
 public:
  Generator(std::shared_ptr<backend::Client> client, std::shared_ptr<backend::ImageStore> images)
      : client_(std::move(client)), images_(std::move(images)) {
    require(client_ != nullptr, "generator needs a generation client");
    if (!images_) images_ = std::make_shared<backend::ImageStore>();
  }

  /// Validates, sends, and returns the backend's image. Invalid parameters
  /// fail before anything is sent.
  GenerationResult generate(const GenerationRequest& request, std::string_view session_id = {}) const {
    validate(request);
    const Json body = backend::to_json(request);
    const Json reply = client_->call(store::EntryKind::kGenerate, backend::kGenerateEndpoint, body, body, session_id);
    auto wire = backend::generate_response_from_json(reply);
    GenerationResult result;
    result.backend_metadata = std::move(wire.metadata);
    if (wire.image_b64) {
      std::string bytes;
      try {
        bytes = util::base64_decode(*wire.image_b64);
      } catch (const InvalidArgument& e) {
        throw ProtocolError(std::string("generate response image is not valid base64: ") + e.what());
      }
      if (bytes.empty()) throw ProtocolError("generate response image is empty");
      result.image = ImageRef::from_bytes(std::move(bytes), wire.media_type);
      images_->put(result.image);
    } else {
      if (!util::is_sha256_hex(*wire.image_ref)) throw ProtocolError("generate response image_ref is not a SHA-256 digest");
      result.image = ImageRef::from_hash(*wire.image_ref, wire.media_type);
    }
    return result;
  }

 private:
  std::shared_ptr<backend::Client> client_;
  std::shared_ptr<backend::ImageStore> images_;
};

}  // namespace dascore::generate
