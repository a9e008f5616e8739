#pragma once

#include <string>
#include <vector>

#include "raggen/corpus.hpp"

namespace fixtures {

// Twenty short documents with distinct vocabularies; the standing corpus for
// filter, pipeline and CLI tests. Kept ASCII and free of the mock backend's
// gibberish tokens.
inline std::vector<raggen::Document> twenty_docs() {
  const std::vector<std::pair<std::string, std::string>> data = {
      {"Adipose Tissue",
       "For its survival, the body needs a continuous delivery of energy despite variable "
       "nutrient supplies. To meet energy demands when nutrients are low, adipose tissue "
       "stores excess energy. Reserves are stored within lipid droplets of adipocytes in "
       "the form of triglycerides."},
      {"Cognitive Therapy",
       "Emerging evidence supports cognitive behavioral interventions aimed at reducing "
       "symptoms of depression, anxiety, and obsessive compulsive disorder in autistic "
       "adults without intellectual disability. The interventions also helped autistic "
       "children in several trials."},
      {"Photosynthesis",
       "Photosynthesis converts light energy into chemical energy inside chloroplasts. "
       "Chlorophyll absorbs mostly blue and red wavelengths, and the Calvin cycle fixes "
       "carbon dioxide into glucose molecules that feed the plant."},
      {"Plate Tectonics",
       "Plate tectonics describes the slow movement of lithospheric plates across the "
       "mantle. Earthquakes and volcanoes concentrate along plate boundaries, and seafloor "
       "spreading at mid ocean ridges creates fresh oceanic crust."},
      {"Honeybee Dance",
       "Honeybees communicate the direction and distance of forage through a waggle dance "
       "performed on the comb. The angle of the dance relative to gravity encodes the "
       "bearing of flowers relative to the sun."},
      {"Neutron Stars",
       "A neutron star is the collapsed core of a massive supergiant. Neutron stars pack "
       "more mass than the sun into a sphere twenty kilometers wide, and some spin "
       "hundreds of times per second as pulsars."},
      {"Fermentation",
       "During fermentation yeast converts sugars into ethanol and carbon dioxide. Brewers "
       "control temperature and yeast strain to shape flavor, while bakers rely on the "
       "released gas to leaven bread dough."},
      {"Coral Reefs",
       "Coral reefs are built by colonies of tiny polyps that secrete calcium carbonate "
       "skeletons. Symbiotic algae called zooxanthellae supply most of the coral energy "
       "budget, which is why bleaching follows heat stress."},
      {"Printing Press",
       "The movable type printing press spread rapidly across fifteenth century Europe. "
       "Cheap printed books widened literacy, standardized spelling, and accelerated the "
       "circulation of scientific ideas between distant scholars."},
      {"Glaciers",
       "Glaciers form where winter snowfall exceeds summer melt for many decades. The "
       "compressed ice flows downhill under its own weight, carving valleys and leaving "
       "moraines of crushed rock at its edges."},
      {"Antibiotics",
       "Antibiotics target bacterial machinery such as cell wall synthesis or ribosomes. "
       "Overuse drives resistance because surviving bacteria carry mutations or plasmids "
       "that defeat the drug and spread between species."},
      {"Monsoon",
       "The monsoon is a seasonal reversal of wind driven by unequal heating of land and "
       "ocean. Moist summer air rises over the warm continent and releases heavy rain "
       "that irrigates crops across South Asia."},
      {"Semiconductors",
       "Semiconductor devices exploit the band gap of silicon. Doping with phosphorus or "
       "boron creates mobile electrons or holes, and junctions between doped regions form "
       "the diodes and transistors inside every chip."},
      {"Roman Roads",
       "Roman engineers layered gravel, sand, and fitted paving stones to build roads "
       "that drained well and survived centuries. The network let legions and merchants "
       "travel quickly between provinces of the empire."},
      {"Deep Ocean Vents",
       "Hydrothermal vents on the deep ocean floor spew mineral rich water heated by "
       "magma. Chemosynthetic bacteria oxidize the dissolved sulfides and anchor food "
       "webs of tube worms, crabs, and blind shrimp."},
      {"Vaccination",
       "A vaccine trains the immune system by presenting a harmless antigen. Memory "
       "lymphocytes persist after the response fades, so a later infection meets "
       "antibodies within days instead of weeks."},
      {"Jazz Improvisation",
       "Jazz musicians improvise melodies over a repeating chord progression. Soloists "
       "outline the changes with arpeggios, answer each other in call and response, and "
       "push rhythmic accents off the beat to create swing."},
      {"Permafrost",
       "Permafrost is ground that stays frozen for at least two consecutive years. "
       "Thawing permafrost releases methane trapped in ancient plant matter and "
       "destabilizes buildings, pipelines, and roads built above it."},
      {"Supply Chains",
       "Modern supply chains stretch across continents, moving parts through ports, "
       "warehouses, and assembly plants on tight schedules. A single delayed shipment "
       "can idle factories thousands of kilometers away."},
      {"Bird Migration",
       "Migratory birds navigate using the sun, star patterns, and the magnetic field of "
       "the earth. Many species double their body fat before departure and fly thousands "
       "of kilometers between breeding and wintering grounds."},
  };
  std::vector<raggen::Document> docs;
  for (size_t i = 0; i < data.size(); ++i) {
    raggen::Document doc;
    doc.doc_id = "doc" + std::to_string(i);
    doc.title = data[i].first;
    doc.body = data[i].second;
    doc.source = "fixture";
    docs.push_back(std::move(doc));
  }
  return docs;
}

inline std::vector<raggen::Passage> fixture_passages(size_t window = 300,
                                                     size_t stride = 300) {
  return raggen::chunk_all(twenty_docs(), window, stride);
}

// A fixed three-passage corpus small enough to score by hand.
inline std::vector<raggen::Passage> mini_corpus() {
  std::vector<raggen::Passage> passages;
  const auto add = [&](const std::string& id, const std::string& text) {
    raggen::Passage p;
    p.passage_id = id;
    p.doc_id = id.substr(0, id.find('#'));
    p.text = text;
    passages.push_back(std::move(p));
  };
  add("m0#0", "the cat sat on the mat");
  add("m1#0", "the dog chased the cat");
  add("m2#0", "dogs and cats are pets");
  return passages;
}

}  // namespace fixtures
