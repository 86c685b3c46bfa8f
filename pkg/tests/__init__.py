# Testes para Data-Runner
