# Copyright (c) 2026, The phrasegen Authors. All rights reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Exports pretrained Inception-v3 and VGG19 trunks to TorchScript.

The C++ side loads the two files through `model.backbone.kind = "pretrained"`
and the `inception_path` / `vgg_path` config keys. Both modules take RGB
images in [-1, 1].

  inception: (B, 3, 299, 299) -> (mixed_6e [B, 768, 17, 17], pooled [B, 2048])
  vgg:       (B, 3, H, W)     -> (relu1_2, relu2_2, relu3_4, relu4_4, relu5_4, pool5)
"""

import argparse
import pathlib

import torch
import torchvision

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class Normalize(torch.nn.Module):
    def __init__(self):
        super().__init__()
        self.register_buffer("mean", torch.tensor(IMAGENET_MEAN).view(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor(IMAGENET_STD).view(1, 3, 1, 1))

    def forward(self, x):
        return ((x + 1.0) * 0.5 - self.mean) / self.std


class InceptionTrunk(torch.nn.Module):
    def __init__(self, net):
        super().__init__()
        self.normalize = Normalize()
        self.to_mixed = torch.nn.Sequential(
            net.Conv2d_1a_3x3, net.Conv2d_2a_3x3, net.Conv2d_2b_3x3, net.maxpool1,
            net.Conv2d_3b_1x1, net.Conv2d_4a_3x3, net.maxpool2,
            net.Mixed_5b, net.Mixed_5c, net.Mixed_5d,
            net.Mixed_6a, net.Mixed_6b, net.Mixed_6c, net.Mixed_6d, net.Mixed_6e)
        self.to_pooled = torch.nn.Sequential(net.Mixed_7a, net.Mixed_7b, net.Mixed_7c, net.avgpool)

    def forward(self, images):
        mixed = self.to_mixed(self.normalize(images))
        pooled = torch.flatten(self.to_pooled(mixed), 1)
        return mixed, pooled


class VggTrunk(torch.nn.Module):
    # vgg19.features index of the last ReLU before each of the five max-pools
    TAPS = (3, 8, 17, 26, 35)

    def __init__(self, net):
        super().__init__()
        self.normalize = Normalize()
        layers = list(net.features)
        bounds = (0,) + tuple(t + 1 for t in self.TAPS)
        self.blocks = torch.nn.ModuleList(
            torch.nn.Sequential(*layers[bounds[i]:bounds[i + 1]]) for i in range(len(self.TAPS)))
        self.pool = layers[-1]

    def forward(self, images):
        x = self.normalize(images)
        taps = []
        for block in self.blocks:
            x = block(x)
            taps.append(x)
        return taps[0], taps[1], taps[2], taps[3], taps[4], self.pool(x)


def build(random_init):
    if random_init:
        inception = torchvision.models.inception_v3(weights=None, aux_logits=True, init_weights=True)
        vgg = torchvision.models.vgg19(weights=None)
    else:
        inception = torchvision.models.inception_v3(weights=torchvision.models.Inception_V3_Weights.DEFAULT)
        vgg = torchvision.models.vgg19(weights=torchvision.models.VGG19_Weights.DEFAULT)
    trunks = {"inception": InceptionTrunk(inception), "vgg": VggTrunk(vgg)}
    for trunk in trunks.values():
        trunk.eval()
        for p in trunk.parameters():
            p.requires_grad_(False)
    return trunks


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=pathlib.Path, default=pathlib.Path("backbones"))
    parser.add_argument("--random-init", action="store_true",
                        help="skip the weight download (interface testing only)")
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    trunks = build(args.random_init)
    probes = {"inception": torch.zeros(1, 3, 299, 299), "vgg": torch.zeros(1, 3, 128, 128)}
    for name, trunk in trunks.items():
        scripted = torch.jit.script(trunk)
        with torch.no_grad():
            shapes = [tuple(t.shape) for t in scripted(probes[name])]
        path = args.out / f"{name}.pt"
        scripted.save(str(path))
        print(f"{path}: outputs {shapes}")
    print("set model.backbone.kind=pretrained, model.backbone.inception_path and model.backbone.vgg_path")


if __name__ == "__main__":
    main()
